#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "disentangle/generative.hpp"
#include "disentangle/linalg.hpp"

namespace disent {

struct DenseLayer {
  Eigen::MatrixXd w;  // out x in
  Eigen::VectorXd b;  // out
};

// MLP encoder/decoder VAE with diagonal Gaussian latent and unit-variance
// Gaussian output. Hidden activations are tanh; the two encoder heads and
// the decoder output are linear.
struct MlpVae {
  std::vector<DenseLayer> enc_hidden;
  DenseLayer enc_mean;
  DenseLayer enc_logvar;
  std::vector<DenseLayer> dec;  // mirror hidden stack plus linear output

  int input_dim() const {
    return static_cast<int>(enc_hidden.empty() ? enc_mean.w.cols()
                                               : enc_hidden.front().w.cols());
  }
  int latent_dim() const { return static_cast<int>(enc_mean.w.rows()); }

  // Xavier-uniform weights (plus or minus sqrt(6 / (fan_in + fan_out))),
  // zero biases, drawn in serialization order so init is reproducible.
  static MlpVae build(int input_dim, int latent_dim,
                      const std::vector<int>& hidden, std::uint64_t seed);
};

// Layers in serialization order: encoder hidden stack, mean head, logvar
// head, decoder stack.
std::vector<DenseLayer*> layer_list(MlpVae& net);
std::vector<const DenseLayer*> layer_list(const MlpVae& net);

MlpVae zeros_like(const MlpVae& net);

GaussianMoments forward_encode(const MlpVae& net, const Eigen::VectorXd& x);

// mean + sqrt(diag(cov)) .* eps for a diagonal-covariance Gaussian.
Eigen::VectorXd reparameterize(const GaussianMoments& g,
                               const Eigen::VectorXd& eps);

// Encoder heads over a batch of row vectors: (means, log variances).
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> encode_batch(
    const MlpVae& net, const Eigen::MatrixXd& x);

// Decoder means over a batch of latent row vectors.
Eigen::MatrixXd decode_batch(const MlpVae& net, const Eigen::MatrixXd& z);

// Mean over the batch of the per-sample objective
//   -0.5 ||decode(z) - x||^2 - (out/2) log(2 pi) - beta KL(q(z|x) || N(0, I)),
// z = mean + sd .* eps, one eps row per batch row. Fills grads (same shapes
// as the network) when non-null. Throws on a non-finite objective.
double loss_and_grad(const MlpVae& net, const Eigen::MatrixXd& batch,
                     double beta, const Eigen::MatrixXd& eps, MlpVae* grads);

struct TrainConfig {
  int epochs = 200;
  double lr = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int batch_size = 100;
  double beta = 1.0;
  std::uint64_t seed = 0;
  int mc_samples_eval = 1000;
};

struct TrainResult {
  MlpVae net;
  std::vector<double> loss_trace;  // one mean training objective per epoch
};

// Adam on shuffled minibatches; deterministic in (net, data, cfg). Throws
// with the epoch index if the objective goes non-finite.
TrainResult train(MlpVae net, const Eigen::MatrixXd& data,
                  const TrainConfig& cfg);

struct DeepSweepRecord {
  double beta = 0.0;
  double elbo = 0.0;
  double tie = 0.0;
  double recon = 0.0;
  double ci_loss = 0.0;
  int realization = 0;
};

// Data-averaged metrics of a trained network. recon is estimated with
// cfg.mc_samples_eval latent draws per example; tie compares the encoder
// to N(F x_pos, E) from the mixing model after fitting the best signed
// latent permutation on a leading alignment batch.
DeepSweepRecord evaluate(const MlpVae& net, const MixingModel& m,
                         const Eigen::MatrixXd& images,
                         const Eigen::MatrixXd& positions,
                         const TrainConfig& cfg, int realization);

// Binary model format: magic "BVAE", u32 version, u32 layer count, then per
// layer u32 rows, u32 cols, row-major f64 weights, f64 bias. Little-endian.
void save_model(const MlpVae& net, const std::filesystem::path& path);
MlpVae load_model(const std::filesystem::path& path);

}  // namespace disent
