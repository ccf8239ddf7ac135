#pragma once

#include <functional>

namespace oef {

// Thread count from OEF_THREADS, else hardware concurrency.
int default_threads();

// Static contiguous partition of [begin, end) into `threads` chunks.
// body(chunk_index, chunk_begin, chunk_end) runs once per non-empty chunk.
void parallel_chunks(int begin, int end, int threads,
                     const std::function<void(int, int, int)>& body);

void parallel_for(int begin, int end, int threads,
                  const std::function<void(int)>& body);

}  // namespace oef
