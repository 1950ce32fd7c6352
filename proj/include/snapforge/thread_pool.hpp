// SPDX-License-Identifier: MIT
//
// A small persistent worker pool with fixed (static) chunking.
//
// The execution variants care about *which* worker touches *which* range:
// privatized reductions combine per-worker buffers in worker order, and the
// deterministic mode relies on every index being owned by exactly one worker
// with a schedule that does not depend on timing.  A work-stealing pool
// would break both, so chunks are assigned statically: worker w of W gets
// [n*w/W, n*(w+1)/W).  The calling thread doubles as worker 0, so a pool of
// size 1 runs everything inline.

#pragma once

#include <condition_variable>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

#include "snapforge/common.hpp"

namespace snapforge {

class WorkerPool {
 public:
  explicit WorkerPool(int workers) : nworkers_(workers < 1 ? 1 : workers) {
    helpers_.reserve(static_cast<std::size_t>(nworkers_ - 1));
    for (int w = 1; w < nworkers_; ++w) {
      helpers_.emplace_back([this, w] { helper_loop(w); });
    }
  }

  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  ~WorkerPool() {
    {
      std::lock_guard<std::mutex> lk(mutex_);
      stop_ = true;
      ++generation_;
    }
    wake_.notify_all();
    for (auto& t : helpers_) t.join();
  }

  int workers() const { return nworkers_; }

  // Runs fn(worker, begin, end) over a static partition of [0, n).
  // Blocks until every chunk has finished; the first exception thrown by any
  // worker is rethrown here after the parallel section has drained.
  void parallel_for(std::int64_t n,
                    const std::function<void(int, std::int64_t, std::int64_t)>& fn) {
    if (n <= 0) return;
    if (nworkers_ == 1) {
      fn(0, 0, n);
      return;
    }
    {
      std::lock_guard<std::mutex> lk(mutex_);
      task_ = &fn;
      task_n_ = n;
      pending_ = nworkers_ - 1;
      ++generation_;
    }
    wake_.notify_all();

    std::exception_ptr mine;
    auto [b, e] = chunk(0, n);
    try {
      if (b < e) fn(0, b, e);
    } catch (...) {
      mine = std::current_exception();
    }

    std::unique_lock<std::mutex> lk(mutex_);
    drained_.wait(lk, [this] { return pending_ == 0; });
    task_ = nullptr;
    std::exception_ptr theirs = first_error_;
    first_error_ = nullptr;
    lk.unlock();

    if (mine) std::rethrow_exception(mine);
    if (theirs) std::rethrow_exception(theirs);
  }

  // Chunk owned by `worker` for a loop of length n: [n*w/W, n*(w+1)/W).
  std::pair<std::int64_t, std::int64_t> chunk(int worker, std::int64_t n) const {
    std::int64_t w = worker;
    std::int64_t ww = nworkers_;
    return {n * w / ww, n * (w + 1) / ww};
  }

 private:
  void helper_loop(int worker) {
    std::uint64_t seen = 0;
    for (;;) {
      const std::function<void(int, std::int64_t, std::int64_t)>* task = nullptr;
      std::int64_t n = 0;
      {
        std::unique_lock<std::mutex> lk(mutex_);
        wake_.wait(lk, [&] { return generation_ != seen; });
        seen = generation_;
        if (stop_) return;
        task = task_;
        n = task_n_;
      }
      auto [b, e] = chunk(worker, n);
      try {
        if (b < e) (*task)(worker, b, e);
      } catch (...) {
        std::lock_guard<std::mutex> lk(mutex_);
        if (!first_error_) first_error_ = std::current_exception();
      }
      {
        std::lock_guard<std::mutex> lk(mutex_);
        if (--pending_ == 0) drained_.notify_one();
      }
    }
  }

  int nworkers_;
  std::vector<std::thread> helpers_;

  std::mutex mutex_;
  std::condition_variable wake_;
  std::condition_variable drained_;
  std::uint64_t generation_ = 0;
  const std::function<void(int, std::int64_t, std::int64_t)>* task_ = nullptr;
  std::int64_t task_n_ = 0;
  int pending_ = 0;
  bool stop_ = false;
  std::exception_ptr first_error_;
};

}  // namespace snapforge
