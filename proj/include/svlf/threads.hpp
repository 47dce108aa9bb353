#pragma once

namespace svlf {

// Worker cap used by every parallel region. Results are bit-identical for any
// value; this only controls how many threads share the fixed work partition.
void set_thread_count(int n);
int thread_count();

}  // namespace svlf
