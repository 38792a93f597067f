#include "hjipi/adam.hpp"

#include <cmath>

#include "hjipi/common.hpp"

namespace hjipi {

void AdamConfig::validate() const {
  if (!(learning_rate > 0.0) || !(beta1 >= 0.0 && beta1 < 1.0) ||
      !(beta2 >= 0.0 && beta2 < 1.0) || !(epsilon > 0.0)) {
    fail(ErrorCategory::kInvalidArgument,
         "adam: need lr > 0, beta in [0, 1), eps > 0");
  }
}

AdamState::AdamState(AdamConfig cfg, Eigen::Index size)
    : config(cfg),
      m(Eigen::VectorXd::Zero(size)),
      s(Eigen::VectorXd::Zero(size)) {
  config.validate();
}

void adam_step(AdamState& state, Eigen::Ref<Eigen::VectorXd> theta,
               const Eigen::Ref<const Eigen::VectorXd>& grad) {
  if (theta.size() != grad.size() || state.m.size() != theta.size() ||
      state.s.size() != theta.size()) {
    fail(ErrorCategory::kInvalidArgument, "adam: shape mismatch");
  }
  const AdamConfig& c = state.config;
  ++state.step;
  state.m = c.beta1 * state.m + (1.0 - c.beta1) * grad;
  state.s = c.beta2 * state.s + (1.0 - c.beta2) * grad.cwiseAbs2();
  const double k = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(c.beta1, k);
  const double c2 = 1.0 - std::pow(c.beta2, k);
  theta.array() -= c.learning_rate * (state.m.array() / c1) /
                   ((state.s.array() / c2).sqrt() + c.epsilon);
}

}  // namespace hjipi
