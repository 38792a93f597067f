#ifndef HJIPI_SRC_SINE_KERNEL_HPP
#define HJIPI_SRC_SINE_KERNEL_HPP

#include <cstddef>

namespace hjipi::detail {

// s[i] = sin(z[i]), c[i] = cos(z[i]). Vectorized; see sine_kernel.cpp.
void sincos_array(const float* z, float* s, float* c, std::ptrdiff_t n);
void sincos_array(const double* z, double* s, double* c, std::ptrdiff_t n);

}  // namespace hjipi::detail

#endif  // HJIPI_SRC_SINE_KERNEL_HPP
