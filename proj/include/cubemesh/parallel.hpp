#pragma once

#include <algorithm>
#include <cstddef>
#include <memory>
#include <thread>

#include <tbb/blocked_range.h>
#include <tbb/global_control.h>
#include <tbb/parallel_for.h>
#include <tbb/task_arena.h>

namespace cubemesh {

/// Fixed-width worker arena. Every parallel_for call is a barrier: it
/// returns only after all iterations finished. An explicit worker count
/// above the core count oversubscribes rather than being clamped.
class Executor {
 public:
  /// workers <= 0 selects the hardware concurrency.
  explicit Executor(int workers = 0)
      : workers_(workers > 0 ? workers : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()))),
        parallelism_(workers_ > 1 ? std::make_unique<tbb::global_control>(
                                        tbb::global_control::max_allowed_parallelism, workers_)
                                  : nullptr),
        arena_(workers_) {}

  int workers() const { return workers_; }

  template <class F>
  void parallel_for(std::size_t n, F&& fn) const {
    if (n == 0) return;
    if (workers_ == 1) {
      for (std::size_t i = 0; i < n; ++i) fn(i);
      return;
    }
    arena_.execute([&] {
      tbb::parallel_for(tbb::blocked_range<std::size_t>(0, n, 1), [&](const tbb::blocked_range<std::size_t>& r) {
        for (std::size_t i = r.begin(); i != r.end(); ++i) fn(i);
      });
    });
  }

 private:
  int workers_;
  std::unique_ptr<tbb::global_control> parallelism_;
  mutable tbb::task_arena arena_;
};

}  // namespace cubemesh
