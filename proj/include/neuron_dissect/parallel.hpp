#ifndef NEURON_DISSECT_PARALLEL_HPP
#define NEURON_DISSECT_PARALLEL_HPP

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace neuron_dissect {

/// Resolves a requested worker count; 0 means one per hardware thread.
inline std::size_t resolve_threads(std::size_t requested) {
  if (requested != 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

/// Worker cap from NEURON_DISSECT_THREADS (unset, empty or 0 = auto).
inline std::size_t threads_from_env() {
  const char* env = std::getenv("NEURON_DISSECT_THREADS");
  if (env == nullptr || *env == '\0') return 0;
  try {
    return static_cast<std::size_t>(std::stoul(env));
  } catch (const std::exception&) {
    return 0;
  }
}

/// Splits [0, n) into contiguous blocks and calls fn(begin, end) for each
/// block on its own thread. The first exception thrown (lowest block) is
/// rethrown on the caller.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  if (n == 0) return;
  const std::size_t workers = std::min(resolve_threads(threads), n);
  if (workers == 1) {
    fn(std::size_t{0}, n);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    const std::size_t chunk = n / workers;
    const std::size_t extra = n % workers;
    std::size_t begin = 0;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t end = begin + chunk + (w < extra ? 1 : 0);
      pool.emplace_back([&fn, &errors, w, begin, end] {
        try {
          fn(begin, end);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
      begin = end;
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace neuron_dissect

#endif  // NEURON_DISSECT_PARALLEL_HPP
