#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "disentangle/generative.hpp"
#include "disentangle/linalg.hpp"

namespace disent {

// Linear-Gaussian VAE. Encoder: z | x ~ N(enc_mean_w x + enc_mean_b,
// diag(exp(enc_logvar_w x + enc_logvar_b))). Decoder: y | z ~
// N(dec_w z + dec_b, I_N); the output variance is pinned to 1.
struct LinearVaeParams {
  Eigen::MatrixXd enc_mean_w;    // k x N
  Eigen::VectorXd enc_mean_b;    // k
  Eigen::MatrixXd enc_logvar_w;  // k x N
  Eigen::VectorXd enc_logvar_b;  // k
  Eigen::MatrixXd dec_w;         // N x k
  Eigen::VectorXd dec_b;         // N

  static constexpr double output_variance = 1.0;

  int data_dim() const { return static_cast<int>(enc_mean_w.cols()); }
  int latent_dim() const { return static_cast<int>(enc_mean_w.rows()); }

  static LinearVaeParams zero(int data_dim, int latent_dim);
};

// Gradient of the integrated objective; same block layout as the parameters.
using LinearVaeGrad = LinearVaeParams;

enum class SolverMode {
  reduced,        // optimize (enc_mean_w, dec_w); enc_logvar closed form
  full,           // optimize all encoder blocks and dec_w
  fixed_decoder,  // dec_w held at a caller-supplied value, encoder free
};

struct SolverConfig {
  SolverMode mode = SolverMode::reduced;
  double grad_tol = 1e-9;  // infinity norm of the free-block gradient
  int max_iters = 200000;
  int restarts = 8;
  std::uint64_t seed = 0;
  double init_scale = 0.1;
  // Decoder for SolverMode::fixed_decoder; ignored otherwise.
  Eigen::MatrixXd fixed_decoder;
};

struct StationaryPoint {
  LinearVaeParams params;
  double beta = 0.0;
  double loss = 0.0;      // integrated objective at the returned point
  double residual = 0.0;  // infinity norm of the free-block gradient
  bool converged = false;
};

// Posterior moments of the encoder at a single input.
GaussianMoments encode(const LinearVaeParams& p, const Eigen::VectorXd& x);

// Expectation of the per-sample objective over x ~ N(0, sigma_x), dropping
// additive constants. Throws std::overflow_error when a latent variance
// exponent exceeds tol::exp_arg_limit.
double integrated_loss(const LinearVaeParams& p, const Eigen::MatrixXd& sigma_x,
                       double beta);

// Analytic gradient of integrated_loss in every parameter block.
LinearVaeGrad loss_gradient(const LinearVaeParams& p,
                            const Eigen::MatrixXd& sigma_x, double beta);

// Ascent to a stationary point of the integrated objective: multi-start
// gradient ascent with a backtracking (halving) line search, biases pinned
// to zero (they are stationary at zero and optimal given the rest).
StationaryPoint solve_stationary(const MixingModel& m, double beta,
                                 const SolverConfig& cfg,
                                 const LinearVaeParams* warm_start = nullptr);

// Same, with the data covariance supplied directly.
StationaryPoint solve_stationary_cov(const Eigen::MatrixXd& sigma_x,
                                     int latent_dim, double beta,
                                     const SolverConfig& cfg,
                                     const LinearVaeParams* warm_start = nullptr);

// Posterior of the decoder's own generative model (mixing matrix dec_w).
// Requires dec_b = 0.
PosteriorMap model_posterior(const LinearVaeParams& p);

// Fixes the latent gauge for reporting: decoder columns ordered by
// descending norm, sign of each column's largest-magnitude entry positive,
// with the matching relabeling applied to the encoder blocks.
LinearVaeParams canonicalize(const LinearVaeParams& p);

namespace detail {

// Infinity norm of the gradient over the blocks the mode optimizes.
double stationarity_residual(const LinearVaeParams& p,
                             const Eigen::MatrixXd& sigma_x, double beta,
                             SolverMode mode);

// Single ascent run from an explicit starting point; appends the objective
// value of every accepted iterate to trace when given.
StationaryPoint ascend_from(const LinearVaeParams& start,
                            const Eigen::MatrixXd& sigma_x, double beta,
                            const SolverConfig& cfg,
                            std::vector<double>* trace = nullptr);

}  // namespace detail

}  // namespace disent
