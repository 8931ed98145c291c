#include "spdstats/parallel.hpp"

#include <algorithm>
#include <condition_variable>
#include <exception>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

namespace spdstats::parallel {

namespace {

thread_local bool t_inside_worker = false;

class Pool {
 public:
  explicit Pool(std::size_t workers) {
    threads_.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      threads_.emplace_back([this, w] { loop(w + 1); });
    }
  }

  ~Pool() {
    {
      std::lock_guard lock(mutex_);
      stopping_ = true;
    }
    wake_.notify_all();
    for (auto& t : threads_) t.join();
  }

  std::size_t size() const noexcept { return threads_.size() + 1; }

  void run(std::size_t chunks, const std::function<void(std::size_t)>& job) {
    std::unique_lock lock(mutex_);
    job_ = &job;
    chunks_ = chunks;
    pending_ = threads_.size();
    ++generation_;
    lock.unlock();
    wake_.notify_all();

    execute(0);

    lock.lock();
    done_.wait(lock, [this] { return pending_ == 0; });
    job_ = nullptr;
  }

 private:
  void execute(std::size_t slot) {
    if (slot < chunks_) {
      t_inside_worker = true;
      (*job_)(slot);
      t_inside_worker = false;
    }
  }

  void loop(std::size_t slot) {
    std::size_t seen = 0;
    for (;;) {
      std::unique_lock lock(mutex_);
      wake_.wait(lock, [&] { return stopping_ || generation_ != seen; });
      if (stopping_) return;
      seen = generation_;
      lock.unlock();

      execute(slot);

      lock.lock();
      if (--pending_ == 0) done_.notify_one();
    }
  }

  std::vector<std::thread> threads_;
  std::mutex mutex_;
  std::condition_variable wake_;
  std::condition_variable done_;
  const std::function<void(std::size_t)>* job_ = nullptr;
  std::size_t chunks_ = 0;
  std::size_t pending_ = 0;
  std::size_t generation_ = 0;
  bool stopping_ = false;
};

std::mutex g_config_mutex;
std::size_t g_threads = 1;
std::unique_ptr<Pool> g_pool;
// Serializes top-level parallel sections so concurrent callers share the pool safely.
std::mutex g_run_mutex;

}  // namespace

void set_num_threads(std::size_t n) {
  if (n == 0) n = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  std::lock_guard run_lock(g_run_mutex);
  std::lock_guard lock(g_config_mutex);
  if (n == g_threads && (n == 1 || g_pool)) return;
  g_pool.reset();
  g_threads = n;
  if (n > 1) g_pool = std::make_unique<Pool>(n - 1);
}

std::size_t num_threads() noexcept {
  std::lock_guard lock(g_config_mutex);
  return g_threads;
}

void for_chunks(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body) {
  if (n == 0) return;
  if (t_inside_worker) {
    body(0, n);
    return;
  }
  std::lock_guard run_lock(g_run_mutex);
  const std::size_t threads = g_pool ? g_pool->size() : 1;
  const std::size_t chunks = std::min(threads, n);
  if (chunks <= 1) {
    t_inside_worker = true;
    try {
      body(0, n);
    } catch (...) {
      t_inside_worker = false;
      throw;
    }
    t_inside_worker = false;
    return;
  }

  std::vector<std::exception_ptr> errors(chunks);
  const std::function<void(std::size_t)> job = [&](std::size_t c) {
    const std::size_t begin = c * n / chunks;
    const std::size_t end = (c + 1) * n / chunks;
    try {
      body(begin, end);
    } catch (...) {
      errors[c] = std::current_exception();
    }
  };
  g_pool->run(chunks, job);
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace spdstats::parallel
