#pragma once

#include <cstddef>
#include <functional>

#include "gate/config.hpp"

GATE_NAMESPACE_BEGIN

/// Caps the number of worker threads used by parallel_for. 0 selects the
/// hardware concurrency.
void set_thread_count(unsigned count);
unsigned thread_count();

/// Runs body(chunk_index) for every chunk in [0, chunk_count). Chunks are
/// handed out dynamically; callers that need reproducible results must make
/// each chunk's output depend only on its index.
void parallel_for(std::size_t chunk_count, const std::function<void(std::size_t)>& body);

GATE_NAMESPACE_END
