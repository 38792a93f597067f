#include "hjipi/control_set.hpp"

#include <cmath>
#include <limits>

#include "hjipi/common.hpp"

namespace hjipi {

ControlSet ControlSet::ball(int dim, double radius) {
  if (dim < 1) fail(ErrorCategory::kInvalidArgument, "ball: dim must be >= 1");
  if (!(radius > 0.0)) {
    fail(ErrorCategory::kInvalidArgument, "ball: radius must be > 0");
  }
  ControlSet s;
  s.kind_ = Kind::kBall;
  s.dim_ = dim;
  s.radius_ = radius;
  s.lower_ = Eigen::VectorXd::Constant(dim, -radius);
  s.upper_ = Eigen::VectorXd::Constant(dim, radius);
  return s;
}

ControlSet ControlSet::box(Eigen::VectorXd lower, Eigen::VectorXd upper) {
  if (lower.size() < 1 || lower.size() != upper.size()) {
    fail(ErrorCategory::kInvalidArgument, "box: bound size mismatch");
  }
  if (!(lower.array() < upper.array()).all()) {
    fail(ErrorCategory::kInvalidArgument, "box: lower must be < upper");
  }
  ControlSet s;
  s.kind_ = Kind::kBox;
  s.dim_ = static_cast<int>(lower.size());
  s.lower_ = std::move(lower);
  s.upper_ = std::move(upper);
  return s;
}

Eigen::VectorXd ControlSet::center() const {
  if (kind_ == Kind::kBall) return Eigen::VectorXd::Zero(dim_);
  return 0.5 * (lower_ + upper_);
}

double ControlSet::diameter() const {
  if (kind_ == Kind::kBall) return 2.0 * radius_;
  return (upper_ - lower_).norm();
}

Eigen::VectorXd ControlSet::project(
    const Eigen::Ref<const Eigen::VectorXd>& u) const {
  if (kind_ == Kind::kBall) {
    const double n = u.norm();
    if (n <= radius_) return u;
    // Rounding can leave the scaled point an ulp outside; shrink until not.
    Eigen::VectorXd v = u * (radius_ / n);
    while (v.norm() > radius_) v *= 1.0 - std::numeric_limits<double>::epsilon();
    return v;
  }
  return u.cwiseMax(lower_).cwiseMin(upper_);
}

bool ControlSet::contains(const Eigen::Ref<const Eigen::VectorXd>& u,
                          double tol) const {
  if (u.size() != dim_) return false;
  if (kind_ == Kind::kBall) return u.norm() <= radius_ + tol;
  return ((u.array() >= lower_.array() - tol) &&
          (u.array() <= upper_.array() + tol))
      .all();
}

Eigen::VectorXd ControlSet::sample_uniform(std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::VectorXd u(dim_);
  if (kind_ == Kind::kBox) {
    for (int i = 0; i < dim_; ++i) {
      u[i] = lower_[i] + (upper_[i] - lower_[i]) * unit(rng);
    }
    return u;
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  double n = 0.0;
  do {
    for (int i = 0; i < dim_; ++i) u[i] = normal(rng);
    n = u.norm();
  } while (n == 0.0);
  const double r = radius_ * std::pow(unit(rng), 1.0 / dim_);
  return u * (r / n);
}

}  // namespace hjipi
