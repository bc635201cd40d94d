#pragma once

#include <cstddef>
#include <functional>

namespace pflow {

// Runs fn(i) for i in [0, n) on up to `workers` threads (the caller's thread
// counts as one). If any call throws, the exception from the lowest index is
// rethrown after all tasks finish.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

std::size_t hardware_workers() noexcept;

}  // namespace pflow
