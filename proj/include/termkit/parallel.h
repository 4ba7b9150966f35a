#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace termkit {

// Fixed shard width used by all data-parallel stages. Sharding depends only
// on the input size, never on the worker count, so per-shard results can be
// merged in shard order and runs are reproducible at any parallelism degree.
inline constexpr std::size_t kShardSize = 256;

struct ShardRange {
  std::size_t begin;
  std::size_t end;
};

inline std::vector<ShardRange> shard_ranges(std::size_t n, std::size_t shard_size = kShardSize) {
  std::vector<ShardRange> shards;
  for (std::size_t begin = 0; begin < n; begin += shard_size)
    shards.push_back({begin, std::min(begin + shard_size, n)});
  return shards;
}

// Runs body(shard_index) for every shard index in [0, shard_count) using up
// to `jobs` worker threads. The body must only write shard-local state. The
// first exception thrown by any shard is rethrown on the calling thread once
// all workers have stopped.
inline void parallel_for_shards(std::size_t shard_count, int jobs,
                                const std::function<void(std::size_t)>& body) {
  if (jobs <= 1 || shard_count <= 1) {
    for (std::size_t s = 0; s < shard_count; ++s) body(s);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mu;
  auto worker = [&] {
    for (;;) {
      if (failed.load(std::memory_order_relaxed)) return;
      std::size_t s = next.fetch_add(1);
      if (s >= shard_count) return;
      try {
        body(s);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!first_error) first_error = std::current_exception();
        failed.store(true, std::memory_order_relaxed);
        return;
      }
    }
  };
  std::size_t n_workers = std::min<std::size_t>(static_cast<std::size_t>(jobs), shard_count);
  std::vector<std::thread> threads;
  threads.reserve(n_workers);
  for (std::size_t w = 0; w < n_workers; ++w) threads.emplace_back(worker);
  for (std::thread& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace termkit
