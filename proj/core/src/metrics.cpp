#include "disentangle/metrics.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "disentangle/rng.hpp"

namespace disent {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

// Exponent of E_x[latent variance_i]: 0.5 [V Sigma V^T]_ii + b_i for the
// log-variance map (V, b). Throws like encode() when it overflows.
Eigen::VectorXd variance_exponents(const LinearVaeParams& p,
                                   const Eigen::MatrixXd& sigma_x,
                                   const char* who) {
  Eigen::VectorXd v = p.enc_logvar_b;
  if (!p.enc_logvar_w.isZero(0.0)) {
    Eigen::MatrixXd vs = p.enc_logvar_w * sigma_x;
    for (int i = 0; i < v.size(); ++i)
      v[i] += 0.5 * vs.row(i).dot(p.enc_logvar_w.row(i));
  }
  if ((v.array() > tol::exp_arg_limit).any())
    throw std::overflow_error(std::string(who) +
                              ": latent variance exponent overflow");
  return v;
}

void check_inputs(const LinearVaeParams& p, const Eigen::MatrixXd& sigma_x,
                  const char* who) {
  if (sigma_x.rows() != sigma_x.cols() || sigma_x.rows() != p.data_dim())
    throw std::invalid_argument(std::string(who) + ": covariance shape mismatch");
}

}  // namespace

double reconstruction_objective(const LinearVaeParams& p,
                                const Eigen::MatrixXd& sigma_x) {
  check_inputs(p, sigma_x, "reconstruction_objective");
  const int n = p.data_dim();

  Eigen::MatrixXd ws = p.enc_mean_w * sigma_x;
  Eigen::MatrixXd wswt = ws * p.enc_mean_w.transpose();
  Eigen::MatrixXd dtd = p.dec_w.transpose() * p.dec_w;
  double fit = (dtd * wswt).trace() -
               2.0 * p.dec_w.cwiseProduct(ws.transpose()).sum() +
               sigma_x.trace();

  Eigen::VectorXd e =
      variance_exponents(p, sigma_x, "reconstruction_objective").array().exp();
  double smear = dtd.diagonal().dot(e);
  double bias = (p.dec_w * p.enc_mean_b + p.dec_b).squaredNorm();

  return -0.5 * (n * kLog2Pi + fit + smear + bias);
}

double conditional_independence_loss(const LinearVaeParams& p,
                                     const Eigen::MatrixXd& sigma_x) {
  check_inputs(p, sigma_x, "conditional_independence_loss");
  const int k = p.latent_dim();

  Eigen::MatrixXd ws = p.enc_mean_w * sigma_x;
  double mean_sq = ws.cwiseProduct(p.enc_mean_w).sum() +
                   p.enc_mean_b.squaredNorm();
  Eigen::VectorXd v =
      variance_exponents(p, sigma_x, "conditional_independence_loss");
  // E_x[log det Sigma_z] is just the sum of the log-variance offsets: the
  // log-variance map is affine in x and x has zero mean.
  double var_sum = v.array().exp().sum();
  double logdet_mean = p.enc_logvar_b.sum();

  return 0.5 * (mean_sq + var_sum - logdet_mean - k);
}

double inference_error(const LinearVaeParams& p, const PosteriorMap& target,
                       const Eigen::MatrixXd& sigma_x) {
  check_inputs(p, sigma_x, "inference_error");
  const int k = p.latent_dim();
  if (target.mean_map.rows() != k || target.mean_map.cols() != p.data_dim() ||
      target.cov.rows() != k || target.cov.cols() != k)
    throw std::invalid_argument("inference_error: target shape mismatch");

  SpdFactor fe(target.cov);
  Eigen::MatrixXd e_inv = fe.inverse();

  Eigen::VectorXd ev =
      variance_exponents(p, sigma_x, "inference_error").array().exp();
  double smear = e_inv.diagonal().dot(ev);
  double logdet_mean = p.enc_logvar_b.sum();

  Eigen::MatrixXd delta = target.mean_map - p.enc_mean_w;
  Eigen::MatrixXd m = (e_inv * delta) * sigma_x;
  double mean_term = delta.cwiseProduct(m).sum();
  double bias_term = p.enc_mean_b.dot(e_inv * p.enc_mean_b);

  return 0.5 * (smear - logdet_mean + fe.log_det() + mean_term + bias_term -
                static_cast<double>(k));
}

MetricBundle metric_bundle(const LinearVaeParams& p, const MixingModel& m,
                           double beta) {
  if (!(beta > 0)) throw std::invalid_argument("metric_bundle: beta must be positive");
  if (m.data_dim() != p.data_dim() || m.source_dim() != p.latent_dim())
    throw std::invalid_argument("metric_bundle: model/parameter shape mismatch");
  Eigen::MatrixXd sigma = data_covariance(m);

  MetricBundle out;
  out.recon = reconstruction_objective(p, sigma);
  out.ci_loss = conditional_independence_loss(p, sigma);
  out.elbo = out.recon - out.ci_loss;
  out.loss_value = out.recon - beta * out.ci_loss;
  out.mie = inference_error(p, model_posterior(p), sigma);
  out.tie = inference_error(p, ground_truth_posterior(m), sigma);
  return out;
}

McBundle mc_oracle_bundle(const LinearVaeParams& p, const MixingModel& m,
                          double beta, int n_x, int n_z, std::uint64_t seed) {
  if (n_x < 1 || n_z < 1)
    throw std::invalid_argument("mc_oracle_bundle: sample counts must be positive");
  if (!(beta > 0)) throw std::invalid_argument("mc_oracle_bundle: beta must be positive");
  if (m.data_dim() != p.data_dim() || m.source_dim() != p.latent_dim())
    throw std::invalid_argument("mc_oracle_bundle: model/parameter shape mismatch");

  const int n = m.data_dim();
  const int k = m.source_dim();
  const PosteriorMap model = model_posterior(p);
  const PosteriorMap truth = ground_truth_posterior(m);
  const GaussianMoments prior{Eigen::VectorXd::Zero(k),
                              Eigen::MatrixXd::Identity(k, k)};

  // Fixed-size batches with per-batch derived streams: the estimate does
  // not depend on how batches would be scheduled across workers.
  constexpr int kBatch = 4096;
  enum { kLoss, kElbo, kMie, kTie, kRecon, kCi, kCount };
  double sum[kCount] = {};
  double sumsq[kCount] = {};

  int done = 0;
  for (std::uint64_t batch = 0; done < n_x; ++batch) {
    const int bs = std::min(kBatch, n_x - done);
    Rng rng(derive_seed(seed, "mc-oracle", batch));
    Eigen::MatrixXd s = rng.normal_matrix(bs, k);
    Eigen::MatrixXd x = s * m.mixing.transpose() + rng.normal_matrix(bs, n);

    for (int i = 0; i < bs; ++i) {
      Eigen::VectorXd xi = x.row(i);
      GaussianMoments q = encode(p, xi);

      double ci = gaussian_kl(q, prior);
      double mie = gaussian_kl(
          q, GaussianMoments{model.mean_map * xi, model.cov});
      double tie = gaussian_kl(
          q, GaussianMoments{truth.mean_map * xi, truth.cov});

      Eigen::VectorXd sd = q.cov.diagonal().array().sqrt();
      double recon = 0.0;
      for (int j = 0; j < n_z; ++j) {
        Eigen::VectorXd z = q.mean + sd.cwiseProduct(rng.normal_vector(k));
        recon += -0.5 * (p.dec_w * z + p.dec_b - xi).squaredNorm();
      }
      recon = recon / n_z - 0.5 * n * kLog2Pi;

      const double vals[kCount] = {recon - beta * ci, recon - ci,
                                   mie, tie, recon, ci};
      for (int t = 0; t < kCount; ++t) {
        sum[t] += vals[t];
        sumsq[t] += vals[t] * vals[t];
      }
    }
    done += bs;
  }

  auto mean_of = [&](int t) { return sum[t] / n_x; };
  auto se_of = [&](int t) {
    if (n_x < 2) return std::numeric_limits<double>::infinity();
    double var = (sumsq[t] - n_x * mean_of(t) * mean_of(t)) / (n_x - 1);
    return std::sqrt(std::max(var, 0.0) / n_x);
  };

  McBundle out;
  out.estimate = MetricBundle{mean_of(kLoss), mean_of(kElbo), mean_of(kMie),
                              mean_of(kTie), mean_of(kRecon), mean_of(kCi)};
  out.standard_error = MetricBundle{se_of(kLoss), se_of(kElbo), se_of(kMie),
                                    se_of(kTie), se_of(kRecon), se_of(kCi)};
  return out;
}

}  // namespace disent
