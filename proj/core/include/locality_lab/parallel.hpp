#pragma once

#include <cstddef>
#include <functional>

namespace locality_lab {

/// Number of worker threads to use when the caller asks for `requested`
/// (0 means "available parallelism").
std::size_t resolve_workers(std::size_t requested) noexcept;

/// Runs body(i) for every i in [0, count) on up to `workers` threads.
/// Work is handed out by an atomic counter, so callers that need ordered
/// output must write into pre-sized slots indexed by i. The first exception
/// thrown by any body is rethrown after all threads join.
void parallel_for(std::size_t count, std::size_t workers,
                  const std::function<void(std::size_t)>& body);

}  // namespace locality_lab
