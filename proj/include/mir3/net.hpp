#pragma once

#include <map>
#include <string>
#include <vector>

#include "mir3/rng.hpp"
#include "mir3/types.hpp"

namespace mir3 {

enum class Activation { kRelu, kTanh, kLinear };

const char* activation_name(Activation a);

struct AdamConfig {
  Scalar lr = 1e-3;
  Scalar beta1 = 0.9;
  Scalar beta2 = 0.999;
  Scalar eps = 1e-8;
};

/// One named parameter array with its gradient slot and Adam state.
struct ParamEntry {
  Vector values;
  Vector grads;
  Vector adam_m;
  Vector adam_v;
  std::int64_t step_count = 0;
};

/// Flat named parameter storage. std::map keeps iteration (and therefore
/// serialization and optimizer order) canonical.
class ParamStore {
 public:
  ParamEntry& add(const std::string& name, Index size);
  ParamEntry& at(const std::string& name);
  const ParamEntry& at(const std::string& name) const;
  bool contains(const std::string& name) const { return entries_.count(name) > 0; }
  std::size_t size() const { return entries_.size(); }

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

 private:
  std::map<std::string, ParamEntry> entries_;
};

/// Feed-forward MLP with a manual tape. Layer l maps sizes[l] -> sizes[l+1]
/// through an affine map followed by the layer's activation. Parameters live
/// in the embedded ParamStore under names "W<l>" / "b<l>"; weights are stored
/// flat and viewed as (out x in) column-major matrices.
class Net {
 public:
  /// Initializes weights and biases uniformly in +-1/sqrt(fan_in), drawing
  /// from `init` in layer order (W then b per layer, column-major).
  Net(std::vector<int> layer_sizes, std::vector<Activation> activations, Rng& init);

  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  int layer_count() const { return static_cast<int>(sizes_.size()) - 1; }
  const std::vector<int>& layer_sizes() const { return sizes_; }
  const std::vector<Activation>& activations() const { return acts_; }

  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }

  bool has_tape() const { return tape_valid_; }

  /// Weight matrix view for layer l (out x in).
  Eigen::Map<Matrix> weight(int layer);
  Eigen::Map<const Matrix> weight(int layer) const;
  Eigen::Map<Vector> bias(int layer);
  Eigen::Map<const Vector> bias(int layer) const;

 private:
  friend Matrix forward(Net&, const Matrix&);
  friend Matrix backward(Net&, const Matrix&, bool);

  std::vector<int> sizes_;
  std::vector<Activation> acts_;
  ParamStore store_;

  // Tape recorded by forward: the batch input and each layer's pre- and
  // post-activation values (columns are samples). Valid until the next
  // forward; repeated backward on one tape accumulates.
  Matrix tape_input_;
  std::vector<Matrix> tape_pre_;
  std::vector<Matrix> tape_post_;
  bool tape_valid_ = false;
};

/// Batched forward pass; columns of `input` are samples. Records the tape.
Matrix forward(Net& net, const Matrix& input);
Vector forward(Net& net, const Vector& input);

/// Reverse pass from d(loss)/d(output) (same shape as the last forward's
/// output). Accumulates parameter gradients unless disabled, and returns
/// d(loss)/d(input). Requires a recorded forward.
Matrix backward(Net& net, const Matrix& output_grad, bool accumulate_param_grads = true);
Vector backward(Net& net, const Vector& output_grad, bool accumulate_param_grads = true);

void zero_grads(ParamStore& store);

/// Global L2 norm over every gradient slot in the store.
Scalar grad_norm(const ParamStore& store);

/// Scales all gradients by max_norm/norm when the global norm exceeds
/// max_norm. max_norm <= 0 disables clipping.
void clip_grad_norm(ParamStore& store, Scalar max_norm);

/// Standard bias-corrected Adam update over every entry; zeroes gradients and
/// increments step counts. Throws on non-finite gradients, naming the entry.
void adam_step(ParamStore& store, const AdamConfig& cfg);

/// theta' <- tau * theta + (1 - tau) * theta'. Topologies must match.
void soft_update(const Net& source, Net& target, Scalar tau);

}  // namespace mir3
