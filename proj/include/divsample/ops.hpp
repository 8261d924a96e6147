#pragma once

#include <cstddef>
#include <vector>

#include "divsample/tensor.hpp"

// Differentiable operations. Each records a node on the tape when any input
// requires grad and recording is enabled. Shape violations throw ShapeError
// naming the op and the offending shapes.
namespace divsample::ops {

// a[m,k] @ b[k,n]
Tensor matmul(const Tensor& a, const Tensor& b);
// a[B,m,k] @ b[B,k,n], independent per leading index.
Tensor bmm(const Tensor& a, const Tensor& b);
// left[J,J] applied to every x[b] of x[B,J,F].
Tensor left_matmul(const Tensor& left, const Tensor& x);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
// x[..., D] + bias[D]
Tensor add_bias(const Tensor& x, const Tensor& bias);

Tensor tanh(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor square(const Tensor& a);
Tensor relu(const Tensor& a);
// log(1 + e^x), overflow-safe.
Tensor softplus(const Tensor& a);
// Max-subtracted softmax over the last axis.
Tensor softmax(const Tensor& a);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
// Reduce the last axis by minimum; gradient flows to the first argmin.
Tensor min_last(const Tensor& a);

Tensor reshape(const Tensor& a, Shape shape);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end);
// Inserts a new axis of length `count` at position `axis` by replication.
Tensor repeat(const Tensor& a, std::size_t axis, std::size_t count);

// x[B,K,D] -> [B,K,K] Euclidean distances between rows of each x[b].
// The subgradient at zero distance is taken as zero.
Tensor pairwise_distances(const Tensor& x);
// x[B,K,D], y[B,D] -> [B,K] with ||x[b,k] - y[b]||.
Tensor distances_to(const Tensor& x, const Tensor& y);

struct BatchNormState {
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double momentum = 0.1;
  double eps = 1e-5;

  explicit BatchNormState(std::size_t features = 0)
      : running_mean(features, 0.0), running_var(features, 1.0) {}
};

enum class Mode { kTrain, kEval };

// x[N,D]: per-feature normalization over the batch axis followed by the
// affine map gamma*xhat + beta. Train mode uses batch statistics (biased
// variance) and updates running stats with the unbiased variance; eval mode
// uses the running stats. Train mode needs N >= 2.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  BatchNormState& state, Mode mode);

}  // namespace divsample::ops
