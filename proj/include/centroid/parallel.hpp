#pragma once

#include <cstddef>
#include <functional>
#include <optional>

namespace centroid {

/// Environment variable consulted when no explicit worker count is given.
inline constexpr const char* kThreadsEnvVar = "CENTROID_LAB_THREADS";

/// Explicit count if given, else CENTROID_LAB_THREADS, else hardware concurrency.
/// Throws ConfigError for non-positive or malformed values.
int resolve_threads(std::optional<int> requested = std::nullopt);

/// Splits [0, n) into contiguous ranges, one per worker, and calls
/// body(begin, end, worker) for each. Exceptions from workers are rethrown.
void parallel_ranges(std::size_t n, int threads,
                     const std::function<void(std::size_t, std::size_t, int)>& body);

}  // namespace centroid
