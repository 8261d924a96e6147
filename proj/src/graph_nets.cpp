#include "divsample/graph_nets.hpp"

#include <cmath>
#include <stdexcept>

namespace divsample {

std::vector<Tensor> StateRefs::tensors() const {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(*p.tensor);
  return out;
}

void StateRefs::set_requires_grad(bool on) const {
  for (const auto& p : params) p.tensor->set_requires_grad(on);
}

void StateRefs::append_to(Checkpoint& ckpt) const {
  for (const auto& p : params) {
    ckpt.entries.push_back({p.name, p.tensor->shape(), {p.tensor->data().begin(), p.tensor->data().end()}});
  }
  for (const auto& b : buffers) ckpt.entries.push_back({b.name, {b.values->size()}, *b.values});
}

void StateRefs::load_from(const Checkpoint& ckpt) const {
  for (const auto& p : params) {
    const auto& e = ckpt.find(p.name);
    if (e.shape != p.tensor->shape()) {
      throw ShapeError("checkpoint: '" + p.name + "' has shape " + shape_str(e.shape) + ", model expects " +
                       shape_str(p.tensor->shape()));
    }
    std::copy(e.values.begin(), e.values.end(), p.tensor->mutable_data().begin());
  }
  for (const auto& b : buffers) {
    const auto& e = ckpt.find(b.name);
    if (e.values.size() != b.values->size()) {
      throw ShapeError("checkpoint: buffer '" + b.name + "' has " + std::to_string(e.values.size()) +
                       " values, model expects " + std::to_string(b.values->size()));
    }
    *b.values = e.values;
  }
}

Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double s = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-s, s);
  std::vector<double> w(fan_in * fan_out);
  for (auto& v : w) v = u(rng);
  return Tensor({fan_in, fan_out}, std::move(w), true);
}

GraphConv::GraphConv(std::size_t joints, std::size_t in_features, std::size_t out_features, Rng& rng) {
  std::uniform_real_distribution<double> noise(-0.01, 0.01);
  std::vector<double> a(joints * joints);
  for (std::size_t i = 0; i < joints; ++i) {
    for (std::size_t j = 0; j < joints; ++j) a[i * joints + j] = (i == j ? 1.0 : 0.0) + noise(rng);
  }
  adjacency = Tensor({joints, joints}, std::move(a), true);
  weight = glorot_uniform(in_features, out_features, rng);
}

Tensor GraphConv::forward(const Tensor& h) const {
  if (h.rank() != 3 || h.dim(1) != joints() || h.dim(2) != in_features()) {
    throw ShapeError("gcl_forward: input " + shape_str(h.shape()) + " does not match adjacency " +
                     shape_str(adjacency.shape()) + " and weight " + shape_str(weight.shape()));
  }
  const auto batch = h.dim(0), j = h.dim(1);
  auto hw = ops::matmul(ops::reshape(h, {batch * j, in_features()}), weight);
  return ops::left_matmul(adjacency, ops::reshape(hw, {batch, j, out_features()}));
}

void GraphConv::visit(StateRefs& refs, const std::string& prefix) {
  refs.params.push_back({prefix + ".adjacency", &adjacency});
  refs.params.push_back({prefix + ".weight", &weight});
}

BatchNorm::BatchNorm(std::size_t features)
    : scale(Tensor::full({features}, 1.0, true)), shift(Tensor::zeros({features}, true)), state(features) {}

Tensor BatchNorm::forward(const Tensor& x, Mode mode) { return ops::batch_norm(x, scale, shift, state, mode); }

void BatchNorm::visit(StateRefs& refs, const std::string& prefix) {
  refs.params.push_back({prefix + ".scale", &scale});
  refs.params.push_back({prefix + ".shift", &shift});
  refs.buffers.push_back({prefix + ".running_mean", &state.running_mean});
  refs.buffers.push_back({prefix + ".running_var", &state.running_var});
}

GcnBlock::GcnBlock(std::size_t joints, const std::vector<std::size_t>& widths, std::optional<std::size_t> head_out,
                   Rng& rng) {
  if (widths.size() < 2 && !head_out) throw std::invalid_argument("GcnBlock: needs at least one layer");
  if (widths.empty()) throw std::invalid_argument("GcnBlock: missing input width");
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    layers_.push_back({GraphConv(joints, widths[l], widths[l + 1], rng), BatchNorm(joints * widths[l + 1])});
  }
  if (head_out) head_.emplace(joints, widths.back(), *head_out, rng);
}

std::size_t GcnBlock::in_features() const {
  return layers_.empty() ? head_->in_features() : layers_.front().conv.in_features();
}

std::size_t GcnBlock::out_features() const {
  return head_ ? head_->out_features() : layers_.back().conv.out_features();
}

Tensor GcnBlock::forward(const Tensor& x, Mode mode) {
  Tensor h = x;
  for (auto& layer : layers_) {
    h = layer.conv.forward(h);
    const Shape shape = h.shape();
    h = layer.norm.forward(ops::reshape(h, {shape[0], shape[1] * shape[2]}), mode);
    h = ops::reshape(ops::tanh(h), shape);
  }
  if (head_) h = head_->forward(h);
  return h;
}

void GcnBlock::visit(StateRefs& refs, const std::string& prefix) {
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto name = prefix + ".layer" + std::to_string(l);
    layers_[l].conv.visit(refs, name);
    layers_[l].norm.visit(refs, name + ".bn");
  }
  if (head_) head_->visit(refs, prefix + ".head");
}

MlpBlock::MlpBlock(std::size_t in_features, const std::vector<LinearSpec>& layers, Rng& rng) {
  if (layers.empty()) throw std::invalid_argument("MlpBlock: needs at least one layer");
  std::size_t in = in_features;
  for (const auto& spec : layers) {
    Layer layer;
    layer.weight = glorot_uniform(in, spec.out, rng);
    layer.bias = Tensor::zeros({spec.out}, true);
    if (spec.batch_norm) layer.norm.emplace(spec.out);
    layer.tanh = spec.tanh;
    layers_.push_back(std::move(layer));
    in = spec.out;
  }
}

std::size_t MlpBlock::in_features() const { return layers_.front().weight.dim(0); }
std::size_t MlpBlock::out_features() const { return layers_.back().weight.dim(1); }

Tensor MlpBlock::forward(const Tensor& x, Mode mode) {
  if (x.rank() != 2 || x.dim(1) != in_features()) {
    throw ShapeError("mlp_forward: input " + shape_str(x.shape()) + " expects [N, " +
                     std::to_string(in_features()) + "]");
  }
  Tensor h = x;
  for (auto& layer : layers_) {
    h = ops::add_bias(ops::matmul(h, layer.weight), layer.bias);
    if (layer.norm) h = layer.norm->forward(h, mode);
    if (layer.tanh) h = ops::tanh(h);
  }
  return h;
}

void MlpBlock::visit(StateRefs& refs, const std::string& prefix) {
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto name = prefix + ".linear" + std::to_string(l);
    refs.params.push_back({name + ".weight", &layers_[l].weight});
    refs.params.push_back({name + ".bias", &layers_[l].bias});
    if (layers_[l].norm) layers_[l].norm->visit(refs, name + ".bn");
  }
}

}  // namespace divsample
