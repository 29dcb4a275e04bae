// Chunked fork/join over an index range. Chunk boundaries depend only on the
// range size, so callers that merge per-chunk results in chunk order get the
// same answer for every thread count.
#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace shrink::detail {

struct Chunk {
  std::size_t index;
  std::size_t begin;
  std::size_t end;
};

inline std::vector<Chunk> make_chunks(std::size_t n, std::size_t chunk_size) {
  std::vector<Chunk> out;
  chunk_size = std::max<std::size_t>(chunk_size, 1);
  for (std::size_t b = 0, i = 0; b < n; b += chunk_size, ++i) {
    out.push_back({i, b, std::min(n, b + chunk_size)});
  }
  return out;
}

/// Runs fn(chunk) for every chunk on up to `threads` workers. The first
/// exception thrown by any worker is rethrown after all workers join.
template <class Fn>
void for_each_chunk(const std::vector<Chunk>& chunks, unsigned threads, Fn&& fn) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(chunks.size())));
  if (threads <= 1) {
    for (const auto& c : chunks) fn(c);
    return;
  }
  std::mutex mu;
  std::size_t next = 0;
  std::exception_ptr error;
  auto worker = [&] {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard lock(mu);
        if (next >= chunks.size() || error) return;
        i = next++;
      }
      try {
        fn(chunks[i]);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace shrink::detail
