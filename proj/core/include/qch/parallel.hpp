#pragma once

#include <cstddef>
#include <functional>

namespace qch {

// Chunk length used for every parallel loop. Reductions are performed per
// chunk and combined in chunk order, so results do not depend on the
// number of threads.
inline constexpr std::size_t kChunkSize = 4096;

// Thread count from QCH_THREADS, else hardware concurrency (at least 1).
int default_thread_count();

// Resolves a requested thread count: values <= 0 mean default_thread_count().
int resolve_threads(int requested);

std::size_t num_chunks(std::size_t n, std::size_t chunk = kChunkSize);

// Calls body(chunk_index, begin, end) for every chunk of [0, n).
void parallel_chunks(std::size_t n, int threads,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& body,
                     std::size_t chunk = kChunkSize);

// Calls body(k) for k in [0, count), one task per index.
void parallel_tasks(std::size_t count, int threads, const std::function<void(std::size_t)>& body);

} // namespace qch
