#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace chase {

// Minimal fixed-size worker pool for parallel fitness evaluation. Work items
// are indexed and write to disjoint slots, so results are independent of
// scheduling and thread count.
class ThreadPool {
 public:
  explicit ThreadPool(int threads) {
    const int extra = std::max(1, threads) - 1;  // caller thread participates
    for (int i = 0; i < extra; ++i)
      workers_.emplace_back([this] { worker_loop(); });
  }

  ~ThreadPool() {
    {
      std::lock_guard lock(m_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto& w : workers_) w.join();
  }

  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  int thread_count() const { return static_cast<int>(workers_.size()) + 1; }

  // Runs fn(0..n-1), blocking until all items complete. The calling thread
  // works too, so a 1-thread pool runs everything inline.
  void parallel_for(int n, const std::function<void(int)>& fn) {
    if (n <= 0) return;
    if (workers_.empty()) {
      for (int i = 0; i < n; ++i) fn(i);
      return;
    }
    {
      std::lock_guard lock(m_);
      fn_ = &fn;
      limit_ = n;
      next_.store(0, std::memory_order_relaxed);
      pending_.store(n, std::memory_order_relaxed);
      batch_++;
    }
    cv_.notify_all();
    run_items();
    std::unique_lock lock(m_);
    done_cv_.wait(lock, [this] {
      return pending_.load(std::memory_order_acquire) == 0 && active_ == 0;
    });
    fn_ = nullptr;
  }

 private:
  // Pulls items until the batch is drained. Only entered after observing the
  // current batch under the mutex, so fn_/limit_ reads are ordered.
  void run_items() {
    while (true) {
      const int i = next_.fetch_add(1, std::memory_order_relaxed);
      if (i >= limit_) break;
      (*fn_)(i);
      pending_.fetch_sub(1, std::memory_order_acq_rel);
    }
  }

  void worker_loop() {
    std::uint64_t seen = 0;
    while (true) {
      {
        std::unique_lock lock(m_);
        cv_.wait(lock, [&] {
          return stop_ || (batch_ != seen && next_.load(std::memory_order_relaxed) < limit_);
        });
        if (stop_) return;
        seen = batch_;
        active_++;
      }
      run_items();
      {
        std::lock_guard lock(m_);
        active_--;
        if (pending_.load(std::memory_order_relaxed) == 0 && active_ == 0)
          done_cv_.notify_all();
      }
    }
  }

  std::vector<std::thread> workers_;
  std::mutex m_;
  std::condition_variable cv_, done_cv_;
  const std::function<void(int)>* fn_ = nullptr;
  int limit_ = 0;
  std::uint64_t batch_ = 0;
  int active_ = 0;
  std::atomic<int> next_{0};
  std::atomic<int> pending_{0};
  bool stop_ = false;
};

}  // namespace chase
