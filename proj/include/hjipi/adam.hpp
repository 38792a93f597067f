// Adam with bias correction. The update for step k >= 1 is
//
//   m <- b1 m + (1 - b1) g,   s <- b2 s + (1 - b2) g^2
//   theta <- theta - lr (m / (1 - b1^k)) / (sqrt(s / (1 - b2^k)) + eps)

#ifndef HJIPI_ADAM_HPP
#define HJIPI_ADAM_HPP

#include <Eigen/Dense>

#include <cstdint>

namespace hjipi {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

struct AdamState {
  AdamConfig config;
  Eigen::VectorXd m;
  Eigen::VectorXd s;
  std::int64_t step = 0;

  AdamState() = default;
  AdamState(AdamConfig cfg, Eigen::Index size);
};

// Advances state and updates theta in place. Throws on shape mismatch.
void adam_step(AdamState& state, Eigen::Ref<Eigen::VectorXd> theta,
               const Eigen::Ref<const Eigen::VectorXd>& grad);

}  // namespace hjipi

#endif  // HJIPI_ADAM_HPP
