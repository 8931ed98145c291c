#pragma once

#include <cstddef>
#include <functional>

namespace spdstats::parallel {

/// Size of the worker pool used by every data-parallel section. 0 selects
/// std::thread::hardware_concurrency().
void set_num_threads(std::size_t n);
std::size_t num_threads() noexcept;

/// Runs body(begin, end) over a static partition of [0, n). The partition
/// only depends on n and the thread count, and nested calls from inside a
/// worker run inline. The exception from the lowest-numbered failing chunk
/// is rethrown.
void for_chunks(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

template <typename F>
void parallel_for(std::size_t n, F&& f) {
  for_chunks(n, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) f(i);
  });
}

/// RAII override of the thread count.
class ScopedThreads {
 public:
  explicit ScopedThreads(std::size_t n) : previous_(num_threads()) { set_num_threads(n); }
  ~ScopedThreads() { set_num_threads(previous_); }
  ScopedThreads(const ScopedThreads&) = delete;
  ScopedThreads& operator=(const ScopedThreads&) = delete;

 private:
  std::size_t previous_;
};

}  // namespace spdstats::parallel

#include <optional>
#include <vector>

namespace spdstats::parallel {

/// Element-wise map with results in index order.
template <typename T, typename F>
std::vector<T> map(std::size_t n, F&& f) {
  std::vector<std::optional<T>> slots(n);
  parallel_for(n, [&](std::size_t i) { slots[i].emplace(f(i)); });
  std::vector<T> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

}  // namespace spdstats::parallel
