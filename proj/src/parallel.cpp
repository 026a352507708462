#include "clouddelta/parallel.hpp"

#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace clouddelta {

int default_thread_count() {
  if (const char* env = std::getenv("CLOUD_DELTA_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0 && v < 1024) {
      return static_cast<int>(v);
    }
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  if (threads <= 0) threads = default_thread_count();
  if (threads > n) threads = n;

  if (threads <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }

  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(threads));
  for (int w = 0; w < threads; ++w) {
    int begin = static_cast<int>(static_cast<long long>(w) * n / threads);
    int end = static_cast<int>(static_cast<long long>(w + 1) * n / threads);
    pool.emplace_back([begin, end, &fn] {
      for (int i = begin; i < end; ++i) fn(i);
    });
  }
  for (std::thread& t : pool) t.join();
}

}  // namespace clouddelta
