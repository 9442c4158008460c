#pragma once

// Thread budget shared by the OpenMP kernels and the harness worker pool.
// SUMI_THREADS caps both; unset means "whatever OpenMP would use".

namespace sumi {

// Number of threads parallel sections may use, >= 1. Reads SUMI_THREADS
// once per call so tests can flip it between sections.
int thread_budget();

}  // namespace sumi
