#pragma once

#include <cstdint>

#include <Eigen/Core>

#include "disentangle/generative.hpp"
#include "disentangle/linear_vae.hpp"

namespace disent {

// Closed-form population metrics of a linear VAE against a mixing model.
// loss_value = recon - beta * ci_loss and elbo = recon - ci_loss; mie
// measures the encoder against the decoder's own posterior, tie against
// the ground-truth posterior.
struct MetricBundle {
  double loss_value = 0.0;
  double elbo = 0.0;
  double mie = 0.0;
  double tie = 0.0;
  double recon = 0.0;
  double ci_loss = 0.0;
};

// Monte-Carlo estimates with per-quantity standard errors.
struct McBundle {
  MetricBundle estimate;
  MetricBundle standard_error;
};

// E_x E_q[log p(x|z)] over x ~ N(0, sigma_x), constants included.
double reconstruction_objective(const LinearVaeParams& p,
                                const Eigen::MatrixXd& sigma_x);

// E_x KL(q(z|x) || N(0, I_k)) over x ~ N(0, sigma_x).
double conditional_independence_loss(const LinearVaeParams& p,
                                     const Eigen::MatrixXd& sigma_x);

// E_x KL(q(z|x) || N(target.mean_map x, target.cov)) over x ~ N(0, sigma_x).
double inference_error(const LinearVaeParams& p, const PosteriorMap& target,
                       const Eigen::MatrixXd& sigma_x);

// All closed-form metrics at once. Requires dec_b = 0 (the decoder's
// posterior is undefined otherwise).
MetricBundle metric_bundle(const LinearVaeParams& p, const MixingModel& m,
                           double beta);

// Independent estimator of metric_bundle: x sampled from the generator,
// the reconstruction term sampled through z draws, the KL terms averaged
// per-x through gaussian_kl. Deterministic in (inputs, seed) and
// independent of how the x batches are scheduled.
McBundle mc_oracle_bundle(const LinearVaeParams& p, const MixingModel& m,
                          double beta, int n_x, int n_z, std::uint64_t seed);

}  // namespace disent
