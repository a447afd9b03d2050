#include "emrld/nn.hpp"

#include <cmath>

namespace emrld {

std::int64_t MlpParams::num_params() const {
  std::int64_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    n += weights[l].size() + biases[l].size();
  }
  return n;
}

std::vector<int> MlpParams::layer_sizes() const {
  std::vector<int> sizes;
  if (weights.empty()) return sizes;
  sizes.push_back(static_cast<int>(weights.front().cols()));
  for (const auto& w : weights) sizes.push_back(static_cast<int>(w.rows()));
  return sizes;
}

void MlpParams::validate() const {
  if (weights.empty()) throw ShapeError("mlp has no layers");
  if (weights.size() != biases.size()) throw ShapeError("mlp weight/bias count mismatch");
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].rows() != biases[l].size()) {
      throw ShapeError("mlp layer " + std::to_string(l) + ": bias length does not match weight rows");
    }
    if (l > 0 && weights[l].cols() != weights[l - 1].rows()) {
      throw ShapeError("mlp layer " + std::to_string(l) + ": input width does not match previous layer");
    }
  }
}

bool operator==(const MlpParams& a, const MlpParams& b) {
  if (a.weights.size() != b.weights.size() || a.biases.size() != b.biases.size()) return false;
  for (std::size_t l = 0; l < a.weights.size(); ++l) {
    if (a.weights[l].rows() != b.weights[l].rows() || a.weights[l].cols() != b.weights[l].cols()) return false;
    if (a.biases[l].size() != b.biases[l].size()) return false;
    if (a.weights[l] != b.weights[l] || a.biases[l] != b.biases[l]) return false;
  }
  return true;
}

MlpParams init_mlp(std::span<const int> layer_sizes, std::uint64_t seed) {
  if (layer_sizes.size() < 2) throw ShapeError("mlp needs at least input and output sizes");
  for (int s : layer_sizes) {
    if (s <= 0) throw ShapeError("mlp layer sizes must be positive");
  }
  std::mt19937_64 rng(seed);
  MlpParams p;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const int in = layer_sizes[l];
    const int out = layer_sizes[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Mat w(out, in);
    for (int r = 0; r < out; ++r) {
      for (int c = 0; c < in; ++c) w(r, c) = dist(rng);
    }
    Vec b(out);
    for (int r = 0; r < out; ++r) b(r) = dist(rng);
    p.weights.push_back(std::move(w));
    p.biases.push_back(std::move(b));
  }
  return p;
}

MlpParams zeros_like(const MlpParams& params) {
  MlpParams z;
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    z.weights.push_back(Mat::Zero(params.weights[l].rows(), params.weights[l].cols()));
    z.biases.push_back(Vec::Zero(params.biases[l].size()));
  }
  return z;
}

Vec flatten(const MlpParams& params) {
  Vec flat(params.num_params());
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    const Mat& w = params.weights[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) flat(k++) = w(r, c);
    }
    flat.segment(k, params.biases[l].size()) = params.biases[l];
    k += params.biases[l].size();
  }
  return flat;
}

MlpParams unflatten(const Vec& flat, std::span<const int> layer_sizes) {
  if (layer_sizes.size() < 2) throw ShapeError("unflatten needs at least two layer sizes");
  std::int64_t expected = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    expected += static_cast<std::int64_t>(layer_sizes[l]) * layer_sizes[l + 1] + layer_sizes[l + 1];
  }
  if (flat.size() != expected) {
    throw ShapeError("flat parameter length " + std::to_string(flat.size()) + " does not match layout length " +
                     std::to_string(expected));
  }
  MlpParams p;
  Eigen::Index k = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const int in = layer_sizes[l];
    const int out = layer_sizes[l + 1];
    Mat w(out, in);
    for (int r = 0; r < out; ++r) {
      for (int c = 0; c < in; ++c) w(r, c) = flat(k++);
    }
    p.weights.push_back(std::move(w));
    p.biases.push_back(flat.segment(k, out));
    k += out;
  }
  return p;
}

MlpParams unflatten_like(const Vec& flat, const MlpParams& like) {
  const auto sizes = like.layer_sizes();
  return unflatten(flat, sizes);
}

Vec mlp_forward(const MlpParams& params, const Vec& input) {
  if (params.weights.empty()) throw ShapeError("mlp has no layers");
  if (input.size() != params.input_size()) {
    throw ShapeError("mlp input length " + std::to_string(input.size()) + ", expected " +
                     std::to_string(params.input_size()));
  }
  Vec h = input;
  const std::size_t n = params.weights.size();
  for (std::size_t l = 0; l < n; ++l) {
    Vec z = params.weights[l] * h + params.biases[l];
    h = (l + 1 < n) ? Vec(z.cwiseMax(0.0)) : z;
  }
  return h;
}

MlpCache mlp_forward_batch(const MlpParams& params, const Mat& inputs) {
  if (params.weights.empty()) throw ShapeError("mlp has no layers");
  if (inputs.rows() != params.input_size()) {
    throw ShapeError("mlp batch input rows " + std::to_string(inputs.rows()) + ", expected " +
                     std::to_string(params.input_size()));
  }
  MlpCache cache;
  const std::size_t n = params.weights.size();
  cache.post.reserve(n + 1);
  cache.pre.reserve(n);
  cache.post.push_back(inputs);
  for (std::size_t l = 0; l < n; ++l) {
    Mat z = params.weights[l] * cache.post.back();
    z.colwise() += params.biases[l];
    cache.post.push_back(l + 1 < n ? Mat(z.cwiseMax(0.0)) : z);
    cache.pre.push_back(std::move(z));
  }
  return cache;
}

FlatGrad mlp_backward_batch(const MlpParams& params, const MlpCache& cache, const Mat& output_grads) {
  const std::size_t n = params.weights.size();
  if (output_grads.rows() != params.output_size() || output_grads.cols() != cache.output().cols()) {
    throw ShapeError("mlp backward: output gradient shape does not match forward batch");
  }
  FlatGrad flat(params.num_params());
  // offsets of each layer block in the flat layout
  std::vector<Eigen::Index> offset(n);
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < n; ++l) {
    offset[l] = k;
    k += params.weights[l].size() + params.biases[l].size();
  }
  Mat delta = output_grads;
  for (std::size_t li = n; li-- > 0;) {
    if (li + 1 < n) {
      delta = delta.cwiseProduct((cache.pre[li].array() > 0.0).cast<double>().matrix());
    }
    const Mat gw = delta * cache.post[li].transpose();
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        flat.data() + offset[li], gw.rows(), gw.cols()) = gw;
    flat.segment(offset[li] + gw.size(), delta.rows()) = delta.rowwise().sum();
    if (li > 0) delta = params.weights[li].transpose() * delta;
  }
  return flat;
}

FlatGrad mlp_backward(const MlpParams& params, const Vec& input, const Vec& output_grad) {
  if (input.size() != params.input_size()) throw ShapeError("mlp backward: input length mismatch");
  if (output_grad.size() != params.output_size()) throw ShapeError("mlp backward: output gradient length mismatch");
  const MlpCache cache = mlp_forward_batch(params, input);
  return mlp_backward_batch(params, cache, output_grad);
}

Mat mlp_jvp_batch(const MlpParams& params, const MlpCache& cache, const Vec& direction) {
  if (direction.size() != params.num_params()) throw ShapeError("jvp direction length mismatch");
  const MlpParams d = unflatten_like(direction, params);
  const std::size_t n = params.weights.size();
  Mat tangent = Mat::Zero(cache.post[0].rows(), cache.post[0].cols());
  for (std::size_t l = 0; l < n; ++l) {
    Mat dz = params.weights[l] * tangent + d.weights[l] * cache.post[l];
    dz.colwise() += d.biases[l];
    if (l + 1 < n) {
      tangent = dz.cwiseProduct((cache.pre[l].array() > 0.0).cast<double>().matrix());
    } else {
      tangent = std::move(dz);
    }
  }
  return tangent;
}

void GaussianPolicy::validate() const {
  net.validate();
  if (sigma.size() != net.output_size()) throw ShapeError("sigma length must equal action dimension");
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    if (!(sigma(i) > 0.0)) throw ShapeError("sigma entries must be strictly positive");
  }
}

GaussianPolicy make_gaussian_policy(std::span<const int> layer_sizes, double sigma, std::uint64_t seed) {
  GaussianPolicy p{init_mlp(layer_sizes, seed), Vec::Constant(layer_sizes.back(), sigma)};
  p.validate();
  return p;
}

double gaussian_log_density(const Vec& mean, const Vec& sigma, const Vec& action) {
  if (mean.size() != action.size() || sigma.size() != action.size()) {
    throw ShapeError("gaussian density: mean, sigma and action lengths differ");
  }
  constexpr double kHalfLog2Pi = 0.91893853320467274178;
  double lp = 0.0;
  for (Eigen::Index i = 0; i < action.size(); ++i) {
    const double z = (action(i) - mean(i)) / sigma(i);
    lp += -0.5 * z * z - std::log(sigma(i)) - kHalfLog2Pi;
  }
  return lp;
}

double gaussian_log_prob(const GaussianPolicy& policy, const Vec& state, const Vec& action) {
  if (action.size() != policy.sigma.size()) throw ShapeError("action length must equal sigma length");
  return gaussian_log_density(mlp_forward(policy.net, state), policy.sigma, action);
}

double gaussian_kl(const Vec& mu1, const Vec& mu2, const Vec& sigma) {
  if (mu1.size() != mu2.size() || mu1.size() != sigma.size()) throw ShapeError("gaussian kl: length mismatch");
  double kl = 0.0;
  for (Eigen::Index i = 0; i < mu1.size(); ++i) {
    if (!(sigma(i) > 0.0)) throw ShapeError("gaussian kl: sigma must be positive");
    const double d = mu1(i) - mu2(i);
    kl += d * d / (2.0 * sigma(i) * sigma(i));
  }
  return kl;
}

MlpParams sgd_step(const MlpParams& params, const FlatGrad& grad, double lr) {
  if (grad.size() != params.num_params()) {
    throw ShapeError("sgd step: gradient length " + std::to_string(grad.size()) + " does not match " +
                     std::to_string(params.num_params()) + " parameters");
  }
  return unflatten_like(flatten(params) - lr * grad, params);
}

GaussianPolicy with_flat_params(const GaussianPolicy& policy, const Vec& flat) {
  return GaussianPolicy{unflatten_like(flat, policy.net), policy.sigma};
}

bool all_finite(const Vec& v) { return v.allFinite(); }

}  // namespace emrld
