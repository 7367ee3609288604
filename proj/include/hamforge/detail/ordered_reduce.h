//
// hamforge - Copyright 2026 hamforge authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef HAMFORGE_DETAIL_ORDERED_REDUCE_H_
#define HAMFORGE_DETAIL_ORDERED_REDUCE_H_

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace hamforge {

template <typename T>
void ordered_map_reduce(std::size_t n, std::size_t workers,
                        const std::function<T(std::size_t)> &item,
                        const std::function<void(std::size_t, T &)> &reduce) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) {
      T r = item(i);
      reduce(i, r);
    }
    return;
  }

  std::atomic<std::size_t> next { 0 };
  std::atomic<bool> failed { false };
  std::size_t turn = 0;
  std::exception_ptr error;
  std::mutex mu;
  std::condition_variable cv;

  auto worker = [&] {
    for (;;) {
      if (failed.load())
        return;
      const std::size_t i = next.fetch_add(1);
      if (i >= n)
        return;
      T r = T();
      std::exception_ptr local;
      try {
        r = item(i);
      } catch (...) {
        local = std::current_exception();
      }
      std::unique_lock lock(mu);
      cv.wait(lock, [&] { return turn == i; });
      if (!error) {
        if (local) {
          error = local;
          failed = true;
        } else {
          try {
            reduce(i, r);
          } catch (...) {
            error = std::current_exception();
            failed = true;
          }
        }
      }
      ++turn;
      cv.notify_all();
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back(worker);
  for (auto &t: pool)
    t.join();
  if (error)
    std::rethrow_exception(error);
}

}  // namespace hamforge

#endif  // HAMFORGE_DETAIL_ORDERED_REDUCE_H_
