#ifndef VECCHIA_PARALLEL_HPP
#define VECCHIA_PARALLEL_HPP

#include <exception>
#include <functional>

#include "vecchia/errors.hpp"

namespace vecchia {

/// Upper bound on worker threads used by the batched layers (default 1).
/// Results never depend on this value.
int max_threads() noexcept;
void set_max_threads(int threads);

namespace detail {
void run_chunks(Index num_chunks, const std::function<void(Index)>& chunk_fn);
}

/// Calls fn(begin, end) over [0, count) split into fixed chunks of
/// `chunk` entries. The split depends only on count and chunk, never on
/// the thread count. If any chunk throws, the exception of the
/// lowest-numbered failing chunk is rethrown after all workers finish.
template <typename Fn>
void parallel_for(Index count, Index chunk, Fn&& fn) {
  if (count <= 0) return;
  if (chunk <= 0) chunk = 1;
  const Index num_chunks = (count + chunk - 1) / chunk;
  detail::run_chunks(num_chunks, [&](Index c) {
    const Index begin = c * chunk;
    const Index end = begin + chunk < count ? begin + chunk : count;
    fn(begin, end);
  });
}

}  // namespace vecchia

#endif  // VECCHIA_PARALLEL_HPP
