#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace emrld {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Raised when tensor shapes do not compose.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised on non-finite intermediates (NaN/Inf) or degenerate linear systems.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense multilayer perceptron. ReLU on hidden layers, identity on the output.
///
/// Flat layout (used by FlatGrad, checkpoints and every optimizer): for each
/// layer in order, the weight matrix in row-major order followed by the bias.
struct MlpParams {
  std::vector<Mat> weights;  // layer l: (out_l x in_l)
  std::vector<Vec> biases;

  int input_size() const { return weights.empty() ? 0 : static_cast<int>(weights.front().cols()); }
  int output_size() const { return weights.empty() ? 0 : static_cast<int>(weights.back().rows()); }
  int num_layers() const { return static_cast<int>(weights.size()); }
  std::int64_t num_params() const;
  /// Layer widths including input and output, e.g. {2, 100, 100, 2}.
  std::vector<int> layer_sizes() const;

  void validate() const;
};

bool operator==(const MlpParams& a, const MlpParams& b);

/// Gradient (or any vector) in the flat layout of an MlpParams.
using FlatGrad = Vec;

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization.
MlpParams init_mlp(std::span<const int> layer_sizes, std::uint64_t seed);
MlpParams zeros_like(const MlpParams& params);

Vec flatten(const MlpParams& params);
MlpParams unflatten(const Vec& flat, std::span<const int> layer_sizes);
/// Unflatten using the shapes of `like`.
MlpParams unflatten_like(const Vec& flat, const MlpParams& like);

Vec mlp_forward(const MlpParams& params, const Vec& input);

/// Activations kept for a batched backward pass. Column j belongs to sample j.
struct MlpCache {
  std::vector<Mat> pre;   // pre-activations per layer
  std::vector<Mat> post;  // post[0] = inputs, post[l+1] = activation of layer l
  const Mat& output() const { return post.back(); }
};

MlpCache mlp_forward_batch(const MlpParams& params, const Mat& inputs);

/// Sum over samples of J_j^T output_grads.col(j), written in flat layout.
FlatGrad mlp_backward_batch(const MlpParams& params, const MlpCache& cache, const Mat& output_grads);

FlatGrad mlp_backward(const MlpParams& params, const Vec& input, const Vec& output_grad);

/// Forward-mode directional derivative: column j is J_j * direction.
Mat mlp_jvp_batch(const MlpParams& params, const MlpCache& cache, const Vec& direction);

/// Diagonal Gaussian policy with a state-dependent mean and a fixed sigma.
struct GaussianPolicy {
  MlpParams net;
  Vec sigma;

  int state_dim() const { return net.input_size(); }
  int action_dim() const { return net.output_size(); }
  void validate() const;
};

GaussianPolicy make_gaussian_policy(std::span<const int> layer_sizes, double sigma, std::uint64_t seed);

double gaussian_log_density(const Vec& mean, const Vec& sigma, const Vec& action);
double gaussian_log_prob(const GaussianPolicy& policy, const Vec& state, const Vec& action);

/// KL(N(mu1, diag sigma^2) || N(mu2, diag sigma^2)).
double gaussian_kl(const Vec& mu1, const Vec& mu2, const Vec& sigma);

MlpParams sgd_step(const MlpParams& params, const FlatGrad& grad, double lr);

/// Replace the network parameters with `flat`, keeping sigma.
GaussianPolicy with_flat_params(const GaussianPolicy& policy, const Vec& flat);

bool all_finite(const Vec& v);

}  // namespace emrld
