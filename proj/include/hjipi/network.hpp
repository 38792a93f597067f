// Fully connected sine network N(t, x; theta) with scalar output:
//
//   h_0 = (t, x),  h_{l+1} = sin(W_l h_l + b_l),  N = W_L h_L + b_L.
//
// Parameters live in one flat double vector; the layout stores, per layer,
// the column-major weight block followed by the bias.

#ifndef HJIPI_NETWORK_HPP
#define HJIPI_NETWORK_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "hjipi/game_problem.hpp"

namespace hjipi {

struct NetworkArch {
  int input_dim = 0;  // d + 1, time first
  std::vector<int> hidden;
  std::string activation = "sine";

  static NetworkArch for_state_dim(int d, std::vector<int> hidden) {
    return NetworkArch{d + 1, std::move(hidden), "sine"};
  }

  int state_dim() const { return input_dim - 1; }
  int num_layers() const { return static_cast<int>(hidden.size()) + 1; }
  int layer_rows(int l) const;
  int layer_cols(int l) const;
  Eigen::Index num_params() const;
  void validate() const;

  bool operator==(const NetworkArch&) const = default;
};

struct LayerSlot {
  Eigen::Index weight_offset = 0;
  Eigen::Index bias_offset = 0;
  int rows = 0;
  int cols = 0;
};

class NetworkState {
 public:
  NetworkState() = default;
  // Zero parameters.
  explicit NetworkState(NetworkArch arch);
  NetworkState(NetworkArch arch, Eigen::VectorXd params);

  const NetworkArch& arch() const { return arch_; }
  const std::vector<LayerSlot>& layout() const { return layout_; }
  const Eigen::VectorXd& params() const { return params_; }
  Eigen::VectorXd& params() { return params_; }

  Eigen::Map<const Eigen::MatrixXd> weight(int l) const;
  Eigen::Map<Eigen::MatrixXd> weight(int l);
  Eigen::Map<const Eigen::VectorXd> bias(int l) const;
  Eigen::Map<Eigen::VectorXd> bias(int l);

  bool all_finite() const { return params_.allFinite(); }

 private:
  NetworkArch arch_;
  std::vector<LayerSlot> layout_;
  Eigen::VectorXd params_;
};

// Glorot uniform weights, U(-s, s) with s = sqrt(6 / (fan_in + fan_out));
// biases zero.
NetworkState xavier_init(const NetworkArch& arch, std::uint64_t seed);

double forward(const NetworkState& state, double t, VecRef x);

// How the network output maps to the value function.
//   kAnsatz: v = g(x) + (T - t) N(t, x)   (terminal condition exact)
//   kPlain:  v = N(t, x)                  (terminal condition penalized)
enum class ValueForm { kAnsatz, kPlain };

double ansatz_value(const NetworkState& state, double t, VecRef x,
                    const TerminalCost& terminal, double horizon);
double value_of(const NetworkState& state, double t, VecRef x,
                const TerminalCost& terminal, double horizon, ValueForm form);

// Text form: header with architecture and activation tag, then one
// parameter per line in shortest round-trip decimal. Bit-exact on reload.
void write_network_text(const NetworkState& state, std::ostream& out);
NetworkState read_network_text(std::istream& in);
void write_network_binary(const NetworkState& state, std::ostream& out);
NetworkState read_network_binary(std::istream& in);

void save_network(const NetworkState& state, const std::string& path);
// Detects text or binary by the leading magic.
NetworkState load_network(const std::string& path);

}  // namespace hjipi

#endif  // HJIPI_NETWORK_HPP
