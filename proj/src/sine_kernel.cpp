// Built with -ffast-math -fopenmp-simd so the loops below map onto the
// vector math library. Only this translation unit gets those flags.

#include "sine_kernel.hpp"

#include <cmath>

namespace hjipi::detail {

void sincos_array(const float* z, float* s, float* c, std::ptrdiff_t n) {
#pragma omp simd
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    s[i] = std::sin(z[i]);
    c[i] = std::cos(z[i]);
  }
}

void sincos_array(const double* z, double* s, double* c, std::ptrdiff_t n) {
#pragma omp simd
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    s[i] = std::sin(z[i]);
    c[i] = std::cos(z[i]);
  }
}

}  // namespace hjipi::detail
