#include "epiflow/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace epiflow {

namespace {
std::atomic<int> g_max_threads{1};
}

void set_max_threads(int n) { g_max_threads.store(std::max(1, n)); }

int max_threads() { return g_max_threads.load(); }

void parallel_rows(int rows, const std::function<void(int)>& fn) {
  const int workers = std::min(max_threads(), rows);
  if (workers <= 1) {
    for (int y = 0; y < rows; ++y) fn(y);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int y = next.fetch_add(1); y < rows; y = next.fetch_add(1)) fn(y);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace epiflow
