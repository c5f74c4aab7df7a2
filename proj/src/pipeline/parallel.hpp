#pragma once

#include <cstddef>
#include <functional>

namespace cdrn {

// Workers used for per-item parallel sections; bounded by the CDRN_THREADS
// environment variable when set, hardware concurrency otherwise.
int worker_count(std::size_t jobs);

// Runs fn(0..n-1) across workers. Callers keep determinism by writing to
// per-index slots and reducing in index order afterwards.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace cdrn
