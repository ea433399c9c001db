#include "mir3/net.hpp"

#include <cmath>
#include <stdexcept>

namespace mir3 {

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::kRelu: return "relu";
    case Activation::kTanh: return "tanh";
    case Activation::kLinear: return "linear";
  }
  return "?";
}

ParamEntry& ParamStore::add(const std::string& name, Index size) {
  if (contains(name)) throw std::invalid_argument("ParamStore: duplicate entry '" + name + "'");
  ParamEntry e;
  e.values = Vector::Zero(size);
  e.grads = Vector::Zero(size);
  e.adam_m = Vector::Zero(size);
  e.adam_v = Vector::Zero(size);
  return entries_.emplace(name, std::move(e)).first->second;
}

ParamEntry& ParamStore::at(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::invalid_argument("ParamStore: no entry '" + name + "'");
  return it->second;
}

const ParamEntry& ParamStore::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::invalid_argument("ParamStore: no entry '" + name + "'");
  return it->second;
}

Net::Net(std::vector<int> layer_sizes, std::vector<Activation> activations, Rng& init)
    : sizes_(std::move(layer_sizes)), acts_(std::move(activations)) {
  if (sizes_.size() < 2) throw std::invalid_argument("Net: need at least input and output sizes");
  for (const int s : sizes_)
    if (s < 1) throw std::invalid_argument("Net: every layer size must be >= 1");
  if (acts_.size() != sizes_.size() - 1)
    throw std::invalid_argument("Net: one activation per layer expected");

  for (int l = 0; l < layer_count(); ++l) {
    const int in = sizes_[static_cast<std::size_t>(l)];
    const int out = sizes_[static_cast<std::size_t>(l) + 1];
    auto& w = store_.add("W" + std::to_string(l), static_cast<Index>(in) * out);
    auto& b = store_.add("b" + std::to_string(l), out);
    const Scalar bound = 1.0 / std::sqrt(static_cast<Scalar>(in));
    for (Index i = 0; i < w.values.size(); ++i) w.values[i] = init.uniform(-bound, bound);
    for (Index i = 0; i < b.values.size(); ++i) b.values[i] = init.uniform(-bound, bound);
  }
}

Eigen::Map<Matrix> Net::weight(int layer) {
  auto& e = store_.at("W" + std::to_string(layer));
  return {e.values.data(), sizes_[static_cast<std::size_t>(layer) + 1],
          sizes_[static_cast<std::size_t>(layer)]};
}

Eigen::Map<const Matrix> Net::weight(int layer) const {
  const auto& e = store_.at("W" + std::to_string(layer));
  return {e.values.data(), sizes_[static_cast<std::size_t>(layer) + 1],
          sizes_[static_cast<std::size_t>(layer)]};
}

Eigen::Map<Vector> Net::bias(int layer) {
  auto& e = store_.at("b" + std::to_string(layer));
  return {e.values.data(), e.values.size()};
}

Eigen::Map<const Vector> Net::bias(int layer) const {
  const auto& e = store_.at("b" + std::to_string(layer));
  return {e.values.data(), e.values.size()};
}

namespace {

void apply_activation(Activation act, const Matrix& pre, Matrix& post) {
  switch (act) {
    case Activation::kRelu: post = pre.cwiseMax(0.0); break;
    case Activation::kTanh: post = pre.array().tanh().matrix(); break;
    case Activation::kLinear: post = pre; break;
  }
}

// d(post)/d(pre) evaluated from the taped values.
Matrix activation_grad(Activation act, const Matrix& pre, const Matrix& post) {
  switch (act) {
    case Activation::kRelu:
      return (pre.array() > 0.0).cast<Scalar>().matrix();
    case Activation::kTanh:
      return (1.0 - post.array().square()).matrix();
    case Activation::kLinear:
      return Matrix::Ones(pre.rows(), pre.cols());
  }
  return {};
}

}  // namespace

Matrix forward(Net& net, const Matrix& input) {
  if (input.rows() != net.input_dim())
    throw std::invalid_argument("forward: input dim " + std::to_string(input.rows()) +
                                " != layer 0 input dim " + std::to_string(net.input_dim()));
  const int layers = net.layer_count();
  net.tape_input_ = input;
  net.tape_pre_.assign(static_cast<std::size_t>(layers), Matrix());
  net.tape_post_.assign(static_cast<std::size_t>(layers), Matrix());

  const Matrix* current = &net.tape_input_;
  for (int l = 0; l < layers; ++l) {
    Matrix& pre = net.tape_pre_[static_cast<std::size_t>(l)];
    pre.noalias() = net.weight(l) * (*current);
    pre.colwise() += net.bias(l);
    apply_activation(net.activations()[static_cast<std::size_t>(l)], pre,
                     net.tape_post_[static_cast<std::size_t>(l)]);
    current = &net.tape_post_[static_cast<std::size_t>(l)];
  }
  net.tape_valid_ = true;
  return net.tape_post_.back();
}

Vector forward(Net& net, const Vector& input) {
  return forward(net, Matrix(input)).col(0);
}

Matrix backward(Net& net, const Matrix& output_grad, bool accumulate_param_grads) {
  if (!net.tape_valid_) throw std::logic_error("backward: no recorded forward pass");
  const auto& out = net.tape_post_.back();
  if (output_grad.rows() != out.rows() || output_grad.cols() != out.cols())
    throw std::invalid_argument("backward: output_grad is " + std::to_string(output_grad.rows()) +
                                "x" + std::to_string(output_grad.cols()) + ", expected " +
                                std::to_string(out.rows()) + "x" + std::to_string(out.cols()));

  Matrix delta;
  for (int l = net.layer_count() - 1; l >= 0; --l) {
    const auto& pre = net.tape_pre_[static_cast<std::size_t>(l)];
    const auto& post = net.tape_post_[static_cast<std::size_t>(l)];
    const Matrix& upstream = (l == net.layer_count() - 1) ? output_grad : delta;
    Matrix local = upstream.cwiseProduct(
        activation_grad(net.activations()[static_cast<std::size_t>(l)], pre, post));

    const Matrix& below =
        (l == 0) ? net.tape_input_ : net.tape_post_[static_cast<std::size_t>(l) - 1];
    if (accumulate_param_grads) {
      auto& wgrad = net.params().at("W" + std::to_string(l)).grads;
      Eigen::Map<Matrix> wg(wgrad.data(), local.rows(), below.rows());
      wg.noalias() += local * below.transpose();
      auto& bgrad = net.params().at("b" + std::to_string(l)).grads;
      Eigen::Map<Vector>(bgrad.data(), bgrad.size()) += local.rowwise().sum();
    }
    delta.noalias() = net.weight(l).transpose() * local;
  }
  return delta;
}

Vector backward(Net& net, const Vector& output_grad, bool accumulate_param_grads) {
  return backward(net, Matrix(output_grad), accumulate_param_grads).col(0);
}

void zero_grads(ParamStore& store) {
  for (auto& [name, e] : store) e.grads.setZero();
}

Scalar grad_norm(const ParamStore& store) {
  Scalar sq = 0.0;
  for (const auto& [name, e] : store) sq += e.grads.squaredNorm();
  return std::sqrt(sq);
}

void clip_grad_norm(ParamStore& store, Scalar max_norm) {
  if (max_norm <= 0.0) return;
  const Scalar norm = grad_norm(store);
  if (norm <= max_norm) return;
  const Scalar scale = max_norm / norm;
  for (auto& [name, e] : store) e.grads *= scale;
}

void adam_step(ParamStore& store, const AdamConfig& cfg) {
  for (auto& [name, e] : store) {
    if (!e.grads.allFinite())
      throw std::runtime_error("adam_step: non-finite gradient in parameter '" + name + "'");
    e.step_count += 1;
    const auto t = static_cast<Scalar>(e.step_count);
    e.adam_m = cfg.beta1 * e.adam_m + (1.0 - cfg.beta1) * e.grads;
    e.adam_v = cfg.beta2 * e.adam_v.array().matrix() +
               (1.0 - cfg.beta2) * e.grads.array().square().matrix();
    const Scalar bc1 = 1.0 - std::pow(cfg.beta1, t);
    const Scalar bc2 = 1.0 - std::pow(cfg.beta2, t);
    e.values.array() -=
        cfg.lr * (e.adam_m.array() / bc1) / ((e.adam_v.array() / bc2).sqrt() + cfg.eps);
    e.grads.setZero();
  }
}

void soft_update(const Net& source, Net& target, Scalar tau) {
  if (source.layer_sizes() != target.layer_sizes())
    throw std::invalid_argument("soft_update: source/target topology mismatch");
  for (auto& [name, te] : target.params()) {
    const auto& se = source.params().at(name);
    if (se.values.size() != te.values.size())
      throw std::invalid_argument("soft_update: size mismatch in '" + name + "'");
    te.values = tau * se.values + (1.0 - tau) * te.values;
  }
}

}  // namespace mir3
