#pragma once

// Deterministic data parallelism. Work is split into contiguous chunks that are
// assigned to workers statically (round robin), and each worker runs its chunks
// in increasing order. Callers that reduce must keep per-worker accumulators and
// merge them in worker order; results are then independent of scheduling and
// reproducible for a fixed worker count.

#include <cstdint>
#include <functional>

namespace rfmesh {

// Current worker count. Initialized from RFMESH_THREADS (else hardware
// concurrency) on first use.
int worker_count();

// Override, mainly for determinism tests and the CLI --threads flag.
void set_worker_count(int workers);

// Runs fn(worker, begin, end) over a partition of [0, n). fn may touch shared
// state only through the worker index or the element range. chunks_hint <= 0
// picks 4 chunks per worker.
void parallel_chunks(int64_t n, int chunks_hint,
                     const std::function<void(int, int64_t, int64_t)>& fn);

// Element-wise convenience over parallel_chunks.
void parallel_for(int64_t n, const std::function<void(int64_t)>& fn);

}  // namespace rfmesh
