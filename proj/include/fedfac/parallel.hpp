#pragma once

#include <cstddef>
#include <functional>

namespace fedfac {

/// Run fn(0..n-1) on up to `workers` threads. Tasks must be independent and
/// write only to their own slots; results are then identical for any worker
/// count. workers <= 1 runs inline.
void parallel_for(std::size_t n, std::size_t workers,
                  const std::function<void(std::size_t)>& fn);

}  // namespace fedfac
