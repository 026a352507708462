#pragma once

#include <functional>

namespace clouddelta {

// Worker count used when a caller passes threads = 0: the value of
// CLOUD_DELTA_THREADS if set to a positive integer, otherwise
// std::thread::hardware_concurrency().
int default_thread_count();

// Runs fn(i) for i in [0, n) across a fixed block partition: worker w takes
// the contiguous range [w*n/T, (w+1)*n/T). Each index is processed exactly
// once and writes only its own slot in whatever output the caller set up, so
// results are identical for every thread count, including 1.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

}  // namespace clouddelta
