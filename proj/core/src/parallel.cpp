#include "oef/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace oef {

int default_threads() {
  if (const char* env = std::getenv("OEF_THREADS")) {
    int n = std::atoi(env);
    if (n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_chunks(int begin, int end, int threads,
                     const std::function<void(int, int, int)>& body) {
  const int n = end - begin;
  if (n <= 0) return;
  threads = std::clamp(threads, 1, n);
  if (threads == 1) {
    body(0, begin, end);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> workers;
    workers.reserve(threads);
    for (int t = 0; t < threads; ++t) {
      const int lo = begin + static_cast<int>(static_cast<long long>(n) * t / threads);
      const int hi = begin + static_cast<int>(static_cast<long long>(n) * (t + 1) / threads);
      workers.emplace_back([&, t, lo, hi] {
        try {
          body(t, lo, hi);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

void parallel_for(int begin, int end, int threads,
                  const std::function<void(int)>& body) {
  parallel_chunks(begin, end, threads, [&](int, int lo, int hi) {
    for (int i = lo; i < hi; ++i) body(i);
  });
}

}  // namespace oef
