#ifndef HJIPI_CONTROL_SET_HPP
#define HJIPI_CONTROL_SET_HPP

#include <Eigen/Dense>

#include <random>

namespace hjipi {

// Convex compact admissible control set: a centered Euclidean ball or an
// axis-aligned box.
class ControlSet {
 public:
  enum class Kind { kBall, kBox };

  ControlSet() = default;

  static ControlSet ball(int dim, double radius);
  static ControlSet box(Eigen::VectorXd lower, Eigen::VectorXd upper);
  static ControlSet unit_box(int dim) {
    return box(Eigen::VectorXd::Constant(dim, -1.0),
               Eigen::VectorXd::Constant(dim, 1.0));
  }

  Kind kind() const { return kind_; }
  int dim() const { return dim_; }
  double radius() const { return radius_; }
  const Eigen::VectorXd& lower() const { return lower_; }
  const Eigen::VectorXd& upper() const { return upper_; }

  Eigen::VectorXd center() const;
  // Largest distance between two admissible points.
  double diameter() const;

  Eigen::VectorXd project(const Eigen::Ref<const Eigen::VectorXd>& u) const;
  bool contains(const Eigen::Ref<const Eigen::VectorXd>& u,
                double tol = 1e-9) const;

  // Uniform sample with respect to Lebesgue measure on the set.
  Eigen::VectorXd sample_uniform(std::mt19937_64& rng) const;

 private:
  Kind kind_ = Kind::kBall;
  int dim_ = 0;
  double radius_ = 0.0;
  Eigen::VectorXd lower_;
  Eigen::VectorXd upper_;
};

}  // namespace hjipi

#endif  // HJIPI_CONTROL_SET_HPP
