#include "vecchia/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace vecchia {

namespace {
std::atomic<int> g_max_threads{1};
}

int max_threads() noexcept { return g_max_threads.load(); }

void set_max_threads(int threads) {
  if (threads < 1) throw DomainError("thread count must be >= 1");
  g_max_threads.store(threads);
}

namespace detail {

void run_chunks(Index num_chunks, const std::function<void(Index)>& chunk_fn) {
  const Index workers = std::min<Index>(max_threads(), num_chunks);
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(num_chunks));
  auto guarded = [&](Index c) {
    try {
      chunk_fn(c);
    } catch (...) {
      errors[static_cast<std::size_t>(c)] = std::current_exception();
    }
  };

  if (workers <= 1) {
    for (Index c = 0; c < num_chunks; ++c) guarded(c);
  } else {
    std::atomic<Index> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (Index w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (Index c = next.fetch_add(1); c < num_chunks; c = next.fetch_add(1)) guarded(c);
      });
    }
    for (auto& t : pool) t.join();
  }

  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace detail
}  // namespace vecchia
