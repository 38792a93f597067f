// Shared vocabulary types: error categories, axis-aligned boxes, seed
// derivation and a deterministic static-partition parallel loop.

#ifndef HJIPI_COMMON_HPP
#define HJIPI_COMMON_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace hjipi {

enum class ErrorCategory {
  kInvalidArgument,
  kConfig,
  kMissingInput,
  kNumerical,
  kIo,
};

// Exit codes used by the command line tool, one per category.
int exit_code(ErrorCategory category);
const char* category_name(ErrorCategory category);

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const { return category_; }

 private:
  ErrorCategory category_;
};

[[noreturn]] void fail(ErrorCategory category, const std::string& what);

// Closed axis-aligned box [lower, upper] in R^d.
struct Box {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  static Box cube(int dim, double lo, double hi);

  int dim() const { return static_cast<int>(lower.size()); }
  Eigen::VectorXd center() const { return 0.5 * (lower + upper); }
  Eigen::VectorXd extent() const { return upper - lower; }
  double volume() const { return extent().prod(); }
  bool contains(const Eigen::Ref<const Eigen::VectorXd>& x,
                double tol = 0.0) const;
  bool contains(const Box& other, double tol = 1e-12) const;
  void validate() const;
};

// SplitMix64 finalizer; used to derive independent stream seeds from a
// master seed and a tuple of stream indices.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a,
                          std::uint64_t b = 0, std::uint64_t c = 0);

// Runs body(i) for i in [0, n) on up to `workers` threads. Indices are
// assigned in contiguous static blocks, so any result written to slot i is
// independent of the worker count.
void parallel_for(std::int64_t n, int workers,
                  const std::function<void(std::int64_t)>& body);

}  // namespace hjipi

#endif  // HJIPI_COMMON_HPP
