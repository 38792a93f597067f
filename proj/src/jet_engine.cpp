#include "hjipi/jet.hpp"

#include "sine_kernel.hpp"

namespace hjipi {

template <typename Scalar>
JetEngine<Scalar>::JetEngine(const NetworkArch& arch) : arch_(arch) {
  arch_.validate();
  layout_ = NetworkState(arch_).layout();
  const int layers = arch_.num_layers();
  weights_.resize(layers);
  biases_.resize(layers);
  inputs_.resize(layers);
  pre_.resize(layers - 1);
  sin_.resize(layers - 1);
  cos_.resize(layers - 1);
  grad_w_.resize(layers);
  grad_b_.resize(layers);
}

template <typename Scalar>
void JetEngine<Scalar>::load(const NetworkState& state) {
  if (!(state.arch() == arch_)) {
    fail(ErrorCategory::kInvalidArgument, "jet: architecture mismatch");
  }
  for (int l = 0; l < arch_.num_layers(); ++l) {
    weights_[l] = state.weight(l).template cast<Scalar>();
    biases_[l] = state.bias(l).template cast<Scalar>();
  }
}

template <typename Scalar>
void JetEngine<Scalar>::forward(const Eigen::Ref<const Eigen::VectorXd>& t,
                                const Eigen::Ref<const Eigen::MatrixXd>& x,
                                const Eigen::Ref<const Eigen::MatrixXd>& dirs,
                                JetOrder order) {
  const int d = arch_.state_dim();
  const Eigen::Index B = t.size();
  if (x.rows() != d || x.cols() != B) {
    fail(ErrorCategory::kInvalidArgument, "jet: state batch has wrong shape");
  }
  const int K = jet_channels(order, d);
  if (order != JetOrder::kValue && (dirs.rows() != d || dirs.cols() != d * B)) {
    fail(ErrorCategory::kInvalidArgument, "jet: direction batch has wrong shape");
  }
  batch_ = B;
  channels_ = K;
  order_ = order;

  Matrix& h0 = inputs_[0];
  h0.setZero(d + 1, K * B);
  h0.block(0, 0, 1, B) = t.transpose().template cast<Scalar>();
  h0.block(1, 0, d, B) = x.template cast<Scalar>();
  if (K > 1) {
    // d/dt seeds e_t; first-order channel k seeds (0, u_k). Second-order
    // seeds are zero because the input map is affine.
    h0.block(0, B, 1, B).setOnes();
    for (Eigen::Index j = 0; j < B; ++j) {
      for (int k = 0; k < d; ++k) {
        h0.block(1, (2 + k) * B + j, d, 1) =
            dirs.col(j * d + k).template cast<Scalar>();
      }
    }
  }

  const int last = arch_.num_layers() - 1;
  for (int l = 0; l < last; ++l) {
    const Eigen::Index w = weights_[l].rows();
    Matrix& z = pre_[l];
    z.resize(w, K * B);
    z.noalias() = weights_[l] * inputs_[l];
    z.leftCols(B).colwise() += biases_[l];
    sin_[l].resize(w, B);
    cos_[l].resize(w, B);
    detail::sincos_array(z.data(), sin_[l].data(), cos_[l].data(), w * B);

    Matrix& h = inputs_[l + 1];
    h.resize(w, K * B);
    h.leftCols(B) = sin_[l];
    const auto S = sin_[l].array();
    const auto C = cos_[l].array();
    if (K > 1) {
      for (int c = 1; c < 2 + d; ++c) {
        h.middleCols(c * B, B).array() = C * z.middleCols(c * B, B).array();
      }
    }
    if (order == JetOrder::kSecond) {
      for (int k = 0; k < d; ++k) {
        const auto z1 = z.middleCols((2 + k) * B, B).array();
        const auto z2 = z.middleCols((2 + d + k) * B, B).array();
        h.middleCols((2 + d + k) * B, B).array() = C * z2 - S * z1.square();
      }
    }
  }
  out_.resize(1, K * B);
  out_.noalias() = weights_[last] * inputs_[last];
  out_.leftCols(B).array() += biases_[last](0);
}

template <typename Scalar>
Eigen::MatrixXd JetEngine<Scalar>::outputs() const {
  Eigen::MatrixXd o(channels_, batch_);
  for (int c = 0; c < channels_; ++c) {
    o.row(c) = out_.middleCols(c * batch_, batch_).template cast<double>();
  }
  return o;
}

template <typename Scalar>
void JetEngine<Scalar>::backward(const Eigen::Ref<const Eigen::MatrixXd>& adjoint,
                                 Eigen::Ref<Eigen::VectorXd> grad) {
  const int d = arch_.state_dim();
  const Eigen::Index B = batch_;
  const int K = channels_;
  if (adjoint.rows() != K || adjoint.cols() != B) {
    fail(ErrorCategory::kInvalidArgument, "jet: adjoint has wrong shape");
  }
  if (grad.size() != arch_.num_params()) {
    fail(ErrorCategory::kInvalidArgument, "jet: gradient has wrong length");
  }
  const int last = arch_.num_layers() - 1;

  Matrix g(1, K * B);
  for (int c = 0; c < K; ++c) {
    g.middleCols(c * B, B) = adjoint.row(c).template cast<Scalar>();
  }
  grad_w_[last].noalias() = g * inputs_[last].transpose();
  grad_b_[last].resize(1);
  grad_b_[last](0) = g.leftCols(B).sum();
  adj_h_.noalias() = weights_[last].transpose() * g;

  for (int l = last - 1; l >= 0; --l) {
    const Eigen::Index w = weights_[l].rows();
    adj_z_.resize(w, K * B);
    const auto S = sin_[l].array();
    const auto C = cos_[l].array();
    auto z = [&](int c) { return pre_[l].middleCols(c * B, B).array(); };
    auto yb = [&](int c) { return adj_h_.middleCols(c * B, B).array(); };
    auto zb = [&](int c) { return adj_z_.middleCols(c * B, B).array(); };

    zb(0) = C * yb(0);
    if (K > 1) {
      for (int c = 1; c < 2 + d; ++c) {
        zb(0) -= S * z(c) * yb(c);
        zb(c) = C * yb(c);
      }
    }
    if (order_ == JetOrder::kSecond) {
      for (int k = 0; k < d; ++k) {
        const int c1 = 2 + k;
        const int c2 = 2 + d + k;
        zb(0) -= (S * z(c2) + C * z(c1).square()) * yb(c2);
        zb(c1) -= Scalar(2) * S * z(c1) * yb(c2);
        zb(c2) = C * yb(c2);
      }
    }
    grad_w_[l].noalias() = adj_z_ * inputs_[l].transpose();
    grad_b_[l] = adj_z_.leftCols(B).rowwise().sum();
    if (l > 0) adj_h_.noalias() = weights_[l].transpose() * adj_z_;
  }

  for (int l = 0; l <= last; ++l) {
    const LayerSlot& s = layout_[l];
    Eigen::Map<Eigen::MatrixXd>(grad.data() + s.weight_offset, s.rows, s.cols) +=
        grad_w_[l].template cast<double>();
    grad.segment(s.bias_offset, s.rows) += grad_b_[l].template cast<double>();
  }
}

template class JetEngine<float>;
template class JetEngine<double>;

}  // namespace hjipi
