#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "divsample/checkpoint.hpp"
#include "divsample/ops.hpp"
#include "divsample/rng.hpp"
#include "divsample/tensor.hpp"

namespace divsample {

using ops::Mode;

/// Named references into a network, used for optimizers and checkpoints.
struct StateRefs {
  struct Param {
    std::string name;
    Tensor* tensor;
  };
  struct Buffer {
    std::string name;
    std::vector<double>* values;
  };
  std::vector<Param> params;
  std::vector<Buffer> buffers;

  std::vector<Tensor> tensors() const;
  void set_requires_grad(bool on) const;
  void append_to(Checkpoint& ckpt) const;
  // Copies every referenced value out of `ckpt`; names and sizes must match.
  void load_from(const Checkpoint& ckpt) const;
};

/// Glorot-uniform weight of shape [fan_in, fan_out].
Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);

/// Graph convolution H' = A H W with a fully learnable adjacency.
struct GraphConv {
  Tensor adjacency;  // [J, J]
  Tensor weight;     // [F_in, F_out]

  GraphConv() = default;
  GraphConv(std::size_t joints, std::size_t in_features, std::size_t out_features, Rng& rng);

  std::size_t joints() const { return adjacency.dim(0); }
  std::size_t in_features() const { return weight.dim(0); }
  std::size_t out_features() const { return weight.dim(1); }

  // [B, J, F_in] -> [B, J, F_out]
  Tensor forward(const Tensor& h) const;
  void visit(StateRefs& refs, const std::string& prefix);
};

struct BatchNorm {
  Tensor scale;
  Tensor shift;
  ops::BatchNormState state;

  BatchNorm() = default;
  explicit BatchNorm(std::size_t features);

  // [N, D] -> [N, D]
  Tensor forward(const Tensor& x, Mode mode);
  void visit(StateRefs& refs, const std::string& prefix);
};

/// Stack of GCL-BN-Tanh layers with an optional trailing bare GCL. BN treats
/// the [J, F] activations of one sample as J*F flat features.
class GcnBlock {
 public:
  GcnBlock() = default;
  // widths = {F_0, F_1, ..., F_L}; one GCL-BN-Tanh layer per consecutive pair.
  GcnBlock(std::size_t joints, const std::vector<std::size_t>& widths, std::optional<std::size_t> head_out, Rng& rng);

  Tensor forward(const Tensor& x, Mode mode);
  void visit(StateRefs& refs, const std::string& prefix);

  std::size_t depth() const { return layers_.size(); }
  std::size_t in_features() const;
  std::size_t out_features() const;
  GraphConv& layer(std::size_t i) { return layers_.at(i).conv; }
  BatchNorm& norm(std::size_t i) { return layers_.at(i).norm; }
  const std::optional<GraphConv>& head() const { return head_; }

 private:
  struct Layer {
    GraphConv conv;
    BatchNorm norm;
  };
  std::vector<Layer> layers_;
  std::optional<GraphConv> head_;
};

struct LinearSpec {
  std::size_t out = 0;
  bool batch_norm = false;
  bool tanh = false;
};

/// Sequence of Linear[-BN][-Tanh] layers over [N, D] inputs.
class MlpBlock {
 public:
  MlpBlock() = default;
  MlpBlock(std::size_t in_features, const std::vector<LinearSpec>& layers, Rng& rng);

  Tensor forward(const Tensor& x, Mode mode);
  void visit(StateRefs& refs, const std::string& prefix);

  std::size_t in_features() const;
  std::size_t out_features() const;
  Tensor& weight(std::size_t i) { return layers_.at(i).weight; }
  Tensor& bias(std::size_t i) { return layers_.at(i).bias; }

 private:
  struct Layer {
    Tensor weight;  // [in, out]
    Tensor bias;    // [out]
    std::optional<BatchNorm> norm;
    bool tanh = false;
  };
  std::vector<Layer> layers_;
};

}  // namespace divsample
