#pragma once

#include <cstddef>
#include <functional>

namespace latent_align {

/// Worker count: ALIGN_THREADS if set and positive, else hardware concurrency.
std::size_t thread_count();

/// Run body(i) for i in [0, n). Each index is handled by exactly one worker and
/// bodies must only write state owned by their index, so results do not depend on
/// scheduling. Nested calls run serially on the calling thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

} // namespace latent_align
