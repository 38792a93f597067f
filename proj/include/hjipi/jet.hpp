// Exact input derivatives of the sine network and parameter gradients of
// residual losses built from them.
//
// Derivatives are carried as truncated Taylor coefficients. For a direction
// u the pair (first, second) of z(tau) = W h(x + tau u) + b propagates
// through sin as
//
//   y'  = cos(z) z'
//   y'' = cos(z) z'' - sin(z) (z')^2
//
// With a = U diag(w) U^T, the diffusion contraction is
// Tr(a D^2 v) = sum_k w_k u_k^T D^2 v u_k, i.e. d second-order passes along
// the eigenvectors of a, never the full Hessian. First-order coefficients
// along the orthonormal u_k give the gradient as U (u_k . grad).
//
// A batch is laid out channel-major: every layer holds a (width x K*B)
// matrix whose column block c is channel c for all B points, so each layer
// is a single GEMM. Channels are
//   0            value
//   1            d/dt
//   2 .. 2+d-1   first order along u_k
//   2+d .. 2+2d-1 second order along u_k.
// Reverse accumulation through the same recurrences gives the exact
// parameter gradient of any loss of the jets.

#ifndef HJIPI_JET_HPP
#define HJIPI_JET_HPP

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <vector>

#include "hjipi/network.hpp"

namespace hjipi {

enum class JetOrder { kValue, kFirst, kSecond };

inline int jet_channels(JetOrder order, int d) {
  switch (order) {
    case JetOrder::kValue: return 1;
    case JetOrder::kFirst: return 2 + d;
    case JetOrder::kSecond: return 2 + 2 * d;
  }
  return 1;
}

// Batched forward/reverse jet propagation in precision Scalar. Parameters
// are held in double by NetworkState and cast on load.
template <typename Scalar>
class JetEngine {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  explicit JetEngine(const NetworkArch& arch);

  const NetworkArch& arch() const { return arch_; }
  void load(const NetworkState& state);

  // t: B times, x: d x B states, dirs: d x (d*B) where columns
  // [j*d, (j+1)*d) hold the orthonormal directions at point j (ignored for
  // kValue).
  void forward(const Eigen::Ref<const Eigen::VectorXd>& t,
               const Eigen::Ref<const Eigen::MatrixXd>& x,
               const Eigen::Ref<const Eigen::MatrixXd>& dirs, JetOrder order);

  // Network output channels from the last forward call, K x B.
  Eigen::MatrixXd outputs() const;

  // adjoint: K x B sensitivities of a scalar loss to outputs(). Adds the
  // parameter gradient into grad (length num_params).
  void backward(const Eigen::Ref<const Eigen::MatrixXd>& adjoint,
                Eigen::Ref<Eigen::VectorXd> grad);

 private:
  NetworkArch arch_;
  std::vector<LayerSlot> layout_;
  std::vector<Matrix> weights_;
  std::vector<Vector> biases_;

  // Per forward call.
  Eigen::Index batch_ = 0;
  int channels_ = 0;
  JetOrder order_ = JetOrder::kValue;
  std::vector<Matrix> inputs_;  // input to layer l, rows = cols of W_l
  std::vector<Matrix> pre_;     // pre-activations of hidden layer l
  std::vector<Matrix> sin_;     // sin of the value block
  std::vector<Matrix> cos_;
  Matrix out_;

  // Reverse scratch.
  Matrix adj_h_;
  Matrix adj_z_;
  std::vector<Matrix> grad_w_;
  std::vector<Vector> grad_b_;
};

extern template class JetEngine<float>;
extern template class JetEngine<double>;

// v, dv/dt, grad_x v and Tr(a D^2_xx v) at one point.
struct ValueJet {
  double value = 0.0;
  double dv_dt = 0.0;
  Eigen::VectorXd grad_x;
  double diff_contract = 0.0;
};

// Points plus everything about them that does not depend on theta: terminal
// data for the ansatz and the spectral factors of a = sigma sigma^T.
struct JetBatch {
  double horizon = 0.0;
  ValueForm form = ValueForm::kAnsatz;
  Eigen::VectorXd t;       // B
  Eigen::MatrixXd x;       // d x B
  Eigen::VectorXd g;       // g(x_j)
  Eigen::MatrixXd grad_g;  // d x B
  Eigen::VectorXd diff_g;  // Tr(a D^2 g) at x_j
  Eigen::MatrixXd dirs;    // d x (d*B), columns [j*d, (j+1)*d) = U at x_j
  Eigen::MatrixXd weights; // d x B eigenvalues

  Eigen::Index size() const { return t.size(); }
  int dim() const { return static_cast<int>(x.rows()); }
  // Sub-batch view copy of points [begin, begin + count).
  JetBatch slice(Eigen::Index begin, Eigen::Index count) const;
};

using DiffusionAt = std::function<DiffusionSpec(double t, VecRef x)>;

JetBatch make_jet_batch(Eigen::VectorXd t, Eigen::MatrixXd x,
                        const TerminalCost& terminal, double horizon,
                        const DiffusionAt& diffusion, bool constant_diffusion,
                        ValueForm form = ValueForm::kAnsatz);
JetBatch make_jet_batch(const GameProblem& problem, Eigen::VectorXd t,
                        Eigen::MatrixXd x, ValueForm form = ValueForm::kAnsatz);

enum class Precision { kFloat32, kFloat64 };

struct EngineOptions {
  Precision precision = Precision::kFloat64;
  Eigen::Index chunk_size = 1024;
  int workers = 1;
};

// Jets of the value function (ansatz or plain) at every point of the batch.
std::vector<ValueJet> evaluate_jets(const NetworkState& state,
                                    const JetBatch& batch,
                                    const EngineOptions& options = {});

// Values only; cheaper than full jets.
Eigen::VectorXd evaluate_values(const NetworkState& state,
                                const Eigen::Ref<const Eigen::VectorXd>& t,
                                const Eigen::Ref<const Eigen::MatrixXd>& x,
                                const TerminalCost& terminal, double horizon,
                                ValueForm form = ValueForm::kAnsatz,
                                const EngineOptions& options = {});

ValueJet value_jet(const NetworkState& state, double t, VecRef x,
                   const Eigen::MatrixXd& a_mat, const TerminalCost& terminal,
                   double horizon, ValueForm form = ValueForm::kAnsatz);

// Residual at one point together with its partial derivatives with respect
// to the jet fields; the loss gradient chains through these.
struct ResidualTerm {
  double r = 0.0;
  double d_value = 0.0;
  double d_dt = 0.0;
  Eigen::VectorXd d_grad;
  double d_diff = 0.0;
};

using ResidualFn =
    std::function<ResidualTerm(Eigen::Index point, const ValueJet& jet)>;

// Optional terminal penalty points for the plain value form:
// adds mean_k (v(T, x_k) - g_k)^2 to the loss.
struct TerminalPenalty {
  Eigen::MatrixXd x;  // d x N_bc
  Eigen::VectorXd g;
};

struct LossGradient {
  double loss = 0.0;
  Eigen::VectorXd grad;
};

// Reusable workspace for mean-squared-residual losses. Chunks are evaluated
// independently (in parallel when workers > 1) and reduced in chunk order,
// so results do not depend on the worker count.
class LossEvaluator {
 public:
  LossEvaluator(const NetworkArch& arch, EngineOptions options);
  ~LossEvaluator();
  LossEvaluator(LossEvaluator&&) noexcept;
  LossEvaluator& operator=(LossEvaluator&&) noexcept;

  const EngineOptions& options() const { return options_; }

  LossGradient evaluate(const NetworkState& state, const JetBatch& batch,
                        const ResidualFn& residual,
                        const TerminalPenalty* penalty = nullptr);

 private:
  struct Impl;
  EngineOptions options_;
  std::unique_ptr<Impl> impl_;
};

// loss = mean_j r_j^2 and its exact gradient in theta.
LossGradient loss_param_gradient(const NetworkState& state,
                                 const JetBatch& batch,
                                 const ResidualFn& residual,
                                 const EngineOptions& options = {});

}  // namespace hjipi

#endif  // HJIPI_JET_HPP
