#pragma once

#include <chrono>
#include <cstddef>

// Process-wide knobs used by the crash-safety harness to widen the window in
// which a kill can land mid-write. Off by default.
namespace storyframe::fault_hooks {

void set_write_throttle(std::size_t chunk_bytes, std::chrono::microseconds delay);

}  // namespace storyframe::fault_hooks
