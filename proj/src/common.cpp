#include "hjipi/common.hpp"

#include <algorithm>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace hjipi {

int exit_code(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::kInvalidArgument: return 2;
    case ErrorCategory::kConfig: return 3;
    case ErrorCategory::kMissingInput: return 4;
    case ErrorCategory::kNumerical: return 5;
    case ErrorCategory::kIo: return 6;
  }
  return 1;
}

const char* category_name(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::kInvalidArgument: return "invalid-argument";
    case ErrorCategory::kConfig: return "config";
    case ErrorCategory::kMissingInput: return "missing-input";
    case ErrorCategory::kNumerical: return "numerical";
    case ErrorCategory::kIo: return "io";
  }
  return "unknown";
}

void fail(ErrorCategory category, const std::string& what) {
  throw Error(category, what);
}

Box Box::cube(int dim, double lo, double hi) {
  return Box{Eigen::VectorXd::Constant(dim, lo),
             Eigen::VectorXd::Constant(dim, hi)};
}

bool Box::contains(const Eigen::Ref<const Eigen::VectorXd>& x,
                   double tol) const {
  if (x.size() != lower.size()) return false;
  return ((x.array() >= lower.array() - tol) &&
          (x.array() <= upper.array() + tol))
      .all();
}

bool Box::contains(const Box& other, double tol) const {
  if (other.dim() != dim()) return false;
  return ((other.lower.array() >= lower.array() - tol) &&
          (other.upper.array() <= upper.array() + tol))
      .all();
}

void Box::validate() const {
  if (lower.size() == 0 || lower.size() != upper.size()) {
    fail(ErrorCategory::kInvalidArgument, "box: dimension mismatch or empty");
  }
  if (!(lower.array() < upper.array()).all()) {
    fail(ErrorCategory::kInvalidArgument,
         "box: degenerate domain (lower must be < upper on every axis)");
  }
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a,
                          std::uint64_t b, std::uint64_t c) {
  return mix_seed(mix_seed(mix_seed(seed, a), b), c);
}

void parallel_for(std::int64_t n, int workers,
                  const std::function<void(std::int64_t)>& body) {
  if (n <= 0) return;
  const std::int64_t w =
      std::clamp<std::int64_t>(workers, 1, std::max<std::int64_t>(n, 1));
  if (w == 1) {
    for (std::int64_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> threads;
  std::exception_ptr error;
  std::mutex error_mutex;
  const std::int64_t block = (n + w - 1) / w;
  for (std::int64_t k = 0; k < w; ++k) {
    const std::int64_t begin = k * block;
    const std::int64_t end = std::min(n, begin + block);
    if (begin >= end) break;
    threads.emplace_back([&, begin, end] {
      try {
        for (std::int64_t i = begin; i < end; ++i) body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace hjipi
