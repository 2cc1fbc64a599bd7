#pragma once

#include <cstddef>
#include <functional>

namespace paic {

// Thread count: explicit value if > 0, else PAIC_THREADS, else hardware cores.
unsigned resolve_threads(int requested);

// Calls fn(i) for i in [0, count) on up to `threads` workers. Work items are
// handed out dynamically; callers write results into slot i so the output does
// not depend on scheduling. The first exception thrown is rethrown.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& fn);

}  // namespace paic
