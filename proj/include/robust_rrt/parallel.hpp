#pragma once

#include <tbb/blocked_range.h>
#include <tbb/global_control.h>
#include <tbb/parallel_for.h>
#include <tbb/task_arena.h>

#include <cstddef>
#include <memory>

namespace robust_rrt {

/// Fixed-size worker pool for index-parallel loops.
///
/// Callers must write results into slots owned by the loop index; under that
/// discipline the outcome is independent of the worker count.
class WorkerPool {
 public:
  explicit WorkerPool(int workers = 1) : workers_(workers < 1 ? 1 : workers) {
    if (workers_ > 1) {
      // Allow the requested width even on machines with fewer cores.
      limit_ = std::make_unique<tbb::global_control>(tbb::global_control::max_allowed_parallelism,
                                                     static_cast<std::size_t>(workers_));
      arena_ = std::make_unique<tbb::task_arena>(workers_);
    }
  }

  int workers() const { return workers_; }

  template <class Fn>
  void for_each_index(std::size_t n, Fn&& fn) {
    if (!arena_ || n < 2) {
      for (std::size_t i = 0; i < n; ++i) fn(i);
      return;
    }
    arena_->execute([&] {
      tbb::parallel_for(tbb::blocked_range<std::size_t>(0, n), [&](const auto& r) {
        for (std::size_t i = r.begin(); i != r.end(); ++i) fn(i);
      });
    });
  }

 private:
  int workers_;
  std::unique_ptr<tbb::global_control> limit_;
  std::unique_ptr<tbb::task_arena> arena_;
};

}  // namespace robust_rrt
