#pragma once

#include <cstddef>
#include <functional>

namespace hinftune {

// Worker count used by embarrassingly parallel loops (grid sweeps). Default 1.
void set_thread_count(int threads);
int thread_count();

// Calls body(i) for i in [0, n). Each index is visited exactly once; results
// must be written to index-addressed storage so output is order independent.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace hinftune
