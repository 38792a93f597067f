#include "hjipi/network.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include "format.hpp"

namespace hjipi {

namespace {

constexpr char kTextMagic[] = "hjipi-network";
constexpr char kBinaryMagic[4] = {'H', 'J', 'N', 'B'};
constexpr std::uint32_t kFormatVersion = 1;

std::vector<LayerSlot> make_layout(const NetworkArch& arch) {
  std::vector<LayerSlot> layout;
  Eigen::Index offset = 0;
  for (int l = 0; l < arch.num_layers(); ++l) {
    LayerSlot slot;
    slot.rows = arch.layer_rows(l);
    slot.cols = arch.layer_cols(l);
    slot.weight_offset = offset;
    offset += static_cast<Eigen::Index>(slot.rows) * slot.cols;
    slot.bias_offset = offset;
    offset += slot.rows;
    layout.push_back(slot);
  }
  return layout;
}

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) fail(ErrorCategory::kIo, "network: truncated binary stream");
  return v;
}

}  // namespace

int NetworkArch::layer_rows(int l) const {
  return l < static_cast<int>(hidden.size()) ? hidden[l] : 1;
}

int NetworkArch::layer_cols(int l) const {
  return l == 0 ? input_dim : hidden[l - 1];
}

Eigen::Index NetworkArch::num_params() const {
  Eigen::Index n = 0;
  for (int l = 0; l < num_layers(); ++l) {
    n += static_cast<Eigen::Index>(layer_rows(l)) * (layer_cols(l) + 1);
  }
  return n;
}

void NetworkArch::validate() const {
  if (input_dim < 2) {
    fail(ErrorCategory::kInvalidArgument,
         "network: input dimension must be d + 1 >= 2");
  }
  if (hidden.empty()) {
    fail(ErrorCategory::kInvalidArgument, "network: need >= 1 hidden layer");
  }
  for (int w : hidden) {
    if (w <= 0) {
      fail(ErrorCategory::kInvalidArgument, "network: widths must be > 0");
    }
  }
  if (activation != "sine") {
    fail(ErrorCategory::kInvalidArgument,
         "network: unsupported activation '" + activation + "'");
  }
}

NetworkState::NetworkState(NetworkArch arch)
    : NetworkState(arch, Eigen::VectorXd::Zero(arch.num_params())) {}

NetworkState::NetworkState(NetworkArch arch, Eigen::VectorXd params)
    : arch_(std::move(arch)), params_(std::move(params)) {
  arch_.validate();
  if (params_.size() != arch_.num_params()) {
    fail(ErrorCategory::kInvalidArgument,
         "network: parameter vector does not match the architecture");
  }
  layout_ = make_layout(arch_);
}

Eigen::Map<const Eigen::MatrixXd> NetworkState::weight(int l) const {
  const LayerSlot& s = layout_.at(l);
  return {params_.data() + s.weight_offset, s.rows, s.cols};
}

Eigen::Map<Eigen::MatrixXd> NetworkState::weight(int l) {
  const LayerSlot& s = layout_.at(l);
  return {params_.data() + s.weight_offset, s.rows, s.cols};
}

Eigen::Map<const Eigen::VectorXd> NetworkState::bias(int l) const {
  const LayerSlot& s = layout_.at(l);
  return {params_.data() + s.bias_offset, s.rows};
}

Eigen::Map<Eigen::VectorXd> NetworkState::bias(int l) {
  const LayerSlot& s = layout_.at(l);
  return {params_.data() + s.bias_offset, s.rows};
}

NetworkState xavier_init(const NetworkArch& arch, std::uint64_t seed) {
  NetworkState state(arch);
  std::mt19937_64 rng(seed);
  for (int l = 0; l < arch.num_layers(); ++l) {
    auto w = state.weight(l);
    const double s = std::sqrt(6.0 / (w.rows() + w.cols()));
    std::uniform_real_distribution<double> dist(-s, s);
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = dist(rng);
    }
  }
  return state;
}

double forward(const NetworkState& state, double t, VecRef x) {
  const NetworkArch& arch = state.arch();
  if (x.size() != arch.state_dim()) {
    fail(ErrorCategory::kInvalidArgument, "network: input dimension mismatch");
  }
  Eigen::VectorXd h(arch.input_dim);
  h[0] = t;
  h.tail(x.size()) = x;
  const int last = arch.num_layers() - 1;
  for (int l = 0; l < last; ++l) {
    h = (state.weight(l) * h + state.bias(l)).array().sin().matrix();
  }
  return (state.weight(last) * h + state.bias(last))[0];
}

double ansatz_value(const NetworkState& state, double t, VecRef x,
                    const TerminalCost& terminal, double horizon) {
  return terminal.value(x) + (horizon - t) * forward(state, t, x);
}

double value_of(const NetworkState& state, double t, VecRef x,
                const TerminalCost& terminal, double horizon, ValueForm form) {
  return form == ValueForm::kAnsatz
             ? ansatz_value(state, t, x, terminal, horizon)
             : forward(state, t, x);
}

void write_network_text(const NetworkState& state, std::ostream& out) {
  const NetworkArch& arch = state.arch();
  out << kTextMagic << " v" << kFormatVersion << "\n";
  out << "activation " << arch.activation << "\n";
  out << "input " << arch.input_dim << "\n";
  out << "hidden";
  for (int w : arch.hidden) out << ' ' << w;
  out << "\n";
  out << "params " << state.params().size() << "\n";
  for (Eigen::Index i = 0; i < state.params().size(); ++i) {
    out << detail::format_double(state.params()[i]) << "\n";
  }
  if (!out) fail(ErrorCategory::kIo, "network: write failed");
}

NetworkState read_network_text(std::istream& in) {
  std::string line;
  auto next = [&](const char* what) {
    if (!std::getline(in, line)) {
      fail(ErrorCategory::kIo, std::string("network: missing ") + what);
    }
    return std::istringstream(line);
  };
  {
    auto ss = next("header");
    std::string magic, version;
    ss >> magic >> version;
    if (magic != kTextMagic || version != "v1") {
      fail(ErrorCategory::kIo, "network: not a network text file");
    }
  }
  NetworkArch arch;
  Eigen::Index count = 0;
  {
    auto ss = next("activation");
    std::string key;
    ss >> key >> arch.activation;
    if (key != "activation") fail(ErrorCategory::kIo, "network: bad activation line");
  }
  {
    auto ss = next("input");
    std::string key;
    ss >> key >> arch.input_dim;
    if (key != "input") fail(ErrorCategory::kIo, "network: bad input line");
  }
  {
    auto ss = next("hidden");
    std::string key;
    ss >> key;
    if (key != "hidden") fail(ErrorCategory::kIo, "network: bad hidden line");
    int w = 0;
    while (ss >> w) arch.hidden.push_back(w);
  }
  {
    auto ss = next("params");
    std::string key;
    ss >> key >> count;
    if (key != "params") fail(ErrorCategory::kIo, "network: bad params line");
  }
  arch.validate();
  if (count != arch.num_params()) {
    fail(ErrorCategory::kIo, "network: parameter count does not match header");
  }
  Eigen::VectorXd params(count);
  for (Eigen::Index i = 0; i < count; ++i) {
    if (!std::getline(in, line)) fail(ErrorCategory::kIo, "network: truncated");
    params[i] = detail::parse_double(line);
  }
  return NetworkState(std::move(arch), std::move(params));
}

void write_network_binary(const NetworkState& state, std::ostream& out) {
  const NetworkArch& arch = state.arch();
  out.write(kBinaryMagic, 4);
  put<std::uint32_t>(out, kFormatVersion);
  put<std::uint32_t>(out, 0);  // activation tag: sine
  put<std::uint32_t>(out, static_cast<std::uint32_t>(arch.input_dim));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(arch.hidden.size()));
  for (int w : arch.hidden) put<std::uint32_t>(out, static_cast<std::uint32_t>(w));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(state.params().size()));
  out.write(reinterpret_cast<const char*>(state.params().data()),
            static_cast<std::streamsize>(state.params().size() * sizeof(double)));
  if (!out) fail(ErrorCategory::kIo, "network: write failed");
}

NetworkState read_network_binary(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kBinaryMagic, 4) != 0) {
    fail(ErrorCategory::kIo, "network: not a network binary file");
  }
  if (get<std::uint32_t>(in) != kFormatVersion) {
    fail(ErrorCategory::kIo, "network: unsupported binary version");
  }
  if (get<std::uint32_t>(in) != 0) {
    fail(ErrorCategory::kIo, "network: unknown activation tag");
  }
  NetworkArch arch;
  arch.input_dim = static_cast<int>(get<std::uint32_t>(in));
  const auto layers = get<std::uint32_t>(in);
  if (layers > 4096) fail(ErrorCategory::kIo, "network: corrupt header");
  for (std::uint32_t i = 0; i < layers; ++i) {
    arch.hidden.push_back(static_cast<int>(get<std::uint32_t>(in)));
  }
  arch.validate();
  const auto count = get<std::uint64_t>(in);
  if (static_cast<Eigen::Index>(count) != arch.num_params()) {
    fail(ErrorCategory::kIo, "network: parameter count does not match header");
  }
  Eigen::VectorXd params(static_cast<Eigen::Index>(count));
  in.read(reinterpret_cast<char*>(params.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) fail(ErrorCategory::kIo, "network: truncated binary stream");
  return NetworkState(std::move(arch), std::move(params));
}

void save_network(const NetworkState& state, const std::string& path) {
  const bool binary = path.size() > 4 && path.substr(path.size() - 4) == ".bin";
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) fail(ErrorCategory::kIo, "network: cannot open '" + path + "'");
  if (binary) {
    write_network_binary(state, out);
  } else {
    write_network_text(state, out);
  }
}

NetworkState load_network(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    fail(ErrorCategory::kMissingInput, "network: cannot open '" + path + "'");
  }
  char magic[4] = {};
  in.read(magic, 4);
  in.clear();
  in.seekg(0);
  if (std::memcmp(magic, kBinaryMagic, 4) == 0) return read_network_binary(in);
  return read_network_text(in);
}

}  // namespace hjipi
