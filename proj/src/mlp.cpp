#include "chase/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace chase {

void validate_arch(const MlpArch& arch) {
  if (arch.input_dim < 1 || arch.output_dim < 1)
    throw std::invalid_argument("MlpArch: input/output dims must be >= 1");
  for (int h : arch.hidden_dims)
    if (h < 1) throw std::invalid_argument("MlpArch: hidden dims must be >= 1");
}

std::size_t param_count(const MlpArch& arch) {
  validate_arch(arch);
  std::size_t total = 0;
  int in = arch.input_dim;
  for (int h : arch.hidden_dims) {
    total += static_cast<std::size_t>(in) * h + h;
    in = h;
  }
  total += static_cast<std::size_t>(in) * arch.output_dim + arch.output_dim;
  return total;
}

Policy::Policy(const MlpArch& arch, const ParamVector& params) : arch_(arch) {
  validate_arch(arch);
  const std::size_t expected = param_count(arch);
  if (static_cast<std::size_t>(params.size()) != expected)
    throw std::invalid_argument("Policy: parameter vector length " +
                                std::to_string(params.size()) + " != " +
                                std::to_string(expected));
  if (!params.allFinite())
    throw std::invalid_argument("Policy: parameters must be finite");

  std::vector<int> dims;
  dims.push_back(arch.input_dim);
  for (int h : arch.hidden_dims) dims.push_back(h);
  dims.push_back(arch.output_dim);

  Eigen::Index pos = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const int in = dims[l], out = dims[l + 1];
    Eigen::MatrixXd w(out, in);
    for (int r = 0; r < out; ++r)
      for (int c = 0; c < in; ++c) w(r, c) = params[pos++];
    weights_.push_back(std::move(w));
    biases_.push_back(params.segment(pos, out));
    pos += out;
  }
}

Policy Policy::zero(const MlpArch& arch) {
  return Policy(arch, ParamVector::Zero(static_cast<Eigen::Index>(param_count(arch))));
}

ParamVector Policy::encode() const {
  ParamVector out(static_cast<Eigen::Index>(param_count(arch_)));
  Eigen::Index pos = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    const auto& w = weights_[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) out[pos++] = w(r, c);
    out.segment(pos, biases_[l].size()) = biases_[l];
    pos += biases_[l].size();
  }
  return out;
}

Eigen::VectorXd Policy::forward(const Eigen::Ref<const Eigen::VectorXd>& state) const {
  if (state.size() != arch_.input_dim)
    throw std::invalid_argument("Policy::forward: state dim mismatch");
  Eigen::MatrixXd x = state;
  Workspace ws;
  Eigen::MatrixXd out;
  forward_batch(x, out, ws);
  return out.col(0);
}

void Policy::forward_batch(const Eigen::Ref<const Eigen::MatrixXd>& states,
                           Eigen::MatrixXd& actions, Workspace& ws) const {
  if (states.rows() != arch_.input_dim)
    throw std::invalid_argument("Policy::forward_batch: state dim mismatch");
  const Eigen::Index cols = states.cols();
  const Eigen::MatrixXd* cur = nullptr;

  ws.a.resize(weights_[0].rows(), cols);
  ws.a.noalias() = weights_[0] * states;
  ws.a.colwise() += biases_[0];
  tanh_in_place(ws.a);
  cur = &ws.a;

  for (std::size_t l = 1; l < weights_.size(); ++l) {
    Eigen::MatrixXd& next = (cur == &ws.a) ? ws.b : ws.a;
    next.resize(weights_[l].rows(), cols);
    next.noalias() = weights_[l] * (*cur);
    next.colwise() += biases_[l];
    tanh_in_place(next);
    cur = &next;
  }
  actions = *cur;
}

Eigen::VectorXd MirrorMap::mirror_state(const Eigen::Ref<const Eigen::VectorXd>& s) const {
  if (s.size() != state_signs.size())
    throw std::invalid_argument("MirrorMap: state length mismatch");
  return state_signs.cwiseProduct(s);
}

Eigen::VectorXd MirrorMap::mirror_action(const Eigen::Ref<const Eigen::VectorXd>& a) const {
  if (a.size() != action_signs.size())
    throw std::invalid_argument("MirrorMap: action length mismatch");
  return action_signs.cwiseProduct(a);
}

MirrorMap MirrorMap::chaser() {
  MirrorMap m;
  m.state_signs.resize(5);
  m.state_signs << 1, -1, 1, -1, 1;
  m.action_signs.resize(2);
  m.action_signs << 1, -1;
  return m;
}

}  // namespace chase
