#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

namespace chase {

using ParamVector = Eigen::VectorXd;

// Fixed-topology fully connected net: tanh on every layer including the
// output, so actions are always normalized commands in (-1, 1).
struct MlpArch {
  int input_dim = 0;
  std::vector<int> hidden_dims;
  int output_dim = 0;

  bool operator==(const MlpArch&) const = default;
};

// Total parameter count of the dense-layer chain: sum of in*out + out.
std::size_t param_count(const MlpArch& arch);

void validate_arch(const MlpArch& arch);

// Immutable policy. Weight layout in the flat parameter vector is
// layer-major: for each layer, weights row-major (rows = outputs), then
// biases. This layout is fixed so checkpoints stay portable.
class Policy {
 public:
  Policy(const MlpArch& arch, const ParamVector& params);

  static Policy zero(const MlpArch& arch);

  const MlpArch& arch() const { return arch_; }

  // Flat parameters, exact inverse of construction (bit-level round trip).
  ParamVector encode() const;

  // Scratch buffers so the hot path never allocates. One per rollout thread.
  struct Workspace {
    Eigen::MatrixXd a;
    Eigen::MatrixXd b;
  };

  // Single state -> action, entries in (-1, 1). Allocates; test/demo use.
  Eigen::VectorXd forward(const Eigen::Ref<const Eigen::VectorXd>& state) const;

  // Batch of states (columns) through the net in one pass; used to evaluate
  // the plain and mirrored observation together in the chaser reward.
  void forward_batch(const Eigen::Ref<const Eigen::MatrixXd>& states,
                     Eigen::MatrixXd& actions, Workspace& ws) const;

  const std::vector<Eigen::MatrixXd>& weights() const { return weights_; }
  const std::vector<Eigen::VectorXd>& biases() const { return biases_; }

 private:
  Policy() = default;
  MlpArch arch_;
  std::vector<Eigen::MatrixXd> weights_;  // per layer, rows = outputs
  std::vector<Eigen::VectorXd> biases_;
};

inline Policy decode(const MlpArch& arch, const ParamVector& params) {
  return Policy(arch, params);
}
inline ParamVector encode(const Policy& p) { return p.encode(); }

// Sagittal mirror operators: pure sign vectors (the planar chaser has one
// lateral coordinate per quantity, so no permutation is needed).
struct MirrorMap {
  Eigen::VectorXd state_signs;
  Eigen::VectorXd action_signs;

  Eigen::VectorXd mirror_state(const Eigen::Ref<const Eigen::VectorXd>& s) const;
  Eigen::VectorXd mirror_action(const Eigen::Ref<const Eigen::VectorXd>& a) const;

  // Chaser observation (v, w, dx, dy, d) -> signs (+,-,+,-,+); action
  // (accel, turn) -> signs (+,-).
  static MirrorMap chaser();
};

// Vectorized tanh: 1 - 2/(exp(2x)+1). Exact at 0, saturates cleanly, and
// stays within 1e-15 of std::tanh absolutely; much faster than per-element
// libm calls on whole layers.
template <typename Derived>
inline void tanh_in_place(Eigen::MatrixBase<Derived>& m) {
  m.derived().array() = 1.0 - 2.0 / ((2.0 * m.derived().array()).exp() + 1.0);
}

}  // namespace chase
