#include <doctest.h>

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "disentangle/metrics.hpp"
#include "disentangle/rng.hpp"
#include "test_support.hpp"

using namespace disent;
using testsup::random_mixing;
using testsup::random_params;

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

LinearVaeParams scalar_optimum_params() {
  LinearVaeParams p = LinearVaeParams::zero(1, 1);
  p.enc_mean_w(0, 0) = 0.5;
  p.dec_w(0, 0) = 1.0;
  p.enc_logvar_b[0] = -std::numbers::ln2;
  return p;
}

}  // namespace

TEST_CASE("metric bundle at the scalar optimum") {
  MixingModel m(Eigen::MatrixXd::Constant(1, 1, 1.0));
  MetricBundle b = metric_bundle(scalar_optimum_params(), m, 1.0);

  CHECK(std::abs(b.recon - (-1.4189385332046727)) < 1e-14);
  CHECK(std::abs(b.ci_loss - 0.34657359027997264) < 1e-14);
  CHECK(std::abs(b.loss_value - (-1.7655121234846454)) < 1e-14);
  CHECK(std::abs(b.elbo - (b.recon - b.ci_loss)) < 1e-15);
  // encoder equals both the model posterior and the true posterior here
  CHECK(std::abs(b.mie) < 1e-8);
  CHECK(std::abs(b.tie) < 1e-8);
}

TEST_CASE("zero parameters give the prior encoder") {
  MixingModel m(Eigen::MatrixXd::Constant(1, 1, 1.0));  // sigma_x = 2
  LinearVaeParams p = LinearVaeParams::zero(1, 1);
  MetricBundle b = metric_bundle(p, m, 1.0);

  // no decoder: log p(x|z) = -x^2/2 - ln(2 pi)/2 in expectation
  CHECK(std::abs(b.recon - (-1.0 - 0.5 * kLog2Pi)) < 1e-14);
  CHECK(b.ci_loss == 0.0);  // q is exactly the prior
  CHECK(std::abs(b.elbo - b.recon) < 1e-15);

  // any perturbation makes the KL strictly positive
  p.enc_mean_w(0, 0) = 0.1;
  CHECK(conditional_independence_loss(p, data_covariance(m)) > 0.0);
}

TEST_CASE("bundle identities on random instances") {
  Rng rng(800);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(5));
    const int k = 1 + static_cast<int>(rng.below(2));
    MixingModel m(random_mixing(rng, n, k));
    LinearVaeParams p = random_params(rng, n, k, 0.5);
    p.dec_b.setZero();
    const double beta = 0.25 * (1 + rng.below(12));
    Eigen::MatrixXd sigma = data_covariance(m);

    MetricBundle b = metric_bundle(p, m, beta);
    CHECK(b.loss_value ==
          doctest::Approx(b.recon - beta * b.ci_loss).epsilon(1e-12));
    CHECK(b.elbo == doctest::Approx(b.recon - b.ci_loss).epsilon(1e-12));
    CHECK(b.ci_loss >= -1e-9);
    CHECK(b.mie >= -1e-9);
    CHECK(b.tie >= -1e-9);
    CHECK(b.recon == doctest::Approx(reconstruction_objective(p, sigma))
                         .epsilon(1e-12));
    CHECK(b.ci_loss == doctest::Approx(conditional_independence_loss(p, sigma))
                           .epsilon(1e-12));

    // the solver objective differs from recon - beta*ci only by constants
    const double obj = integrated_loss(p, sigma, beta);
    const double expect =
        b.loss_value + 0.5 * n * kLog2Pi - 0.5 * beta * k;
    CHECK(obj == doctest::Approx(expect).epsilon(1e-11));

    // tie is the inference error against the exact posterior
    PosteriorMap gt = ground_truth_posterior(m);
    CHECK(b.tie ==
          doctest::Approx(inference_error(p, gt, sigma)).epsilon(1e-11));
    // mie measures against the decoder's own posterior
    PosteriorMap own = model_posterior(p);
    CHECK(b.mie ==
          doctest::Approx(inference_error(p, own, sigma)).epsilon(1e-11));
  }
}

TEST_CASE("tie equals mie when the decoder is the true mixing matrix") {
  Rng rng(801);
  for (int trial = 0; trial < 5; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(4));
    const int k = 1 + static_cast<int>(rng.below(2));
    MixingModel m(random_mixing(rng, n, k));
    LinearVaeParams p = random_params(rng, n, k, 0.5);
    p.dec_b.setZero();
    p.dec_w = m.mixing;
    MetricBundle b = metric_bundle(p, m, 1.0);
    CHECK(std::abs(b.tie - b.mie) < 1e-10);
  }
}

TEST_CASE("metric bundle validation") {
  MixingModel m(Eigen::MatrixXd::Constant(1, 1, 1.0));
  LinearVaeParams p = LinearVaeParams::zero(1, 1);
  CHECK_THROWS_AS(metric_bundle(p, m, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(metric_bundle(p, m, -2.0), std::invalid_argument);

  LinearVaeParams wrong = LinearVaeParams::zero(2, 1);
  CHECK_THROWS_AS(metric_bundle(wrong, m, 1.0), std::invalid_argument);

  p.dec_b[0] = 0.5;  // decoder posterior undefined
  CHECK_THROWS_AS(metric_bundle(p, m, 1.0), std::invalid_argument);
}

TEST_CASE("monte carlo oracle is deterministic and schedule independent") {
  Rng mix_rng(802);
  MixingModel m(random_mixing(mix_rng, 3, 2));
  Rng rng(803);
  LinearVaeParams p = random_params(rng, 3, 2, 0.4);
  p.dec_b.setZero();

  McBundle a = mc_oracle_bundle(p, m, 1.0, 5000, 4, 99);
  McBundle b = mc_oracle_bundle(p, m, 1.0, 5000, 4, 99);
  CHECK(a.estimate.recon == b.estimate.recon);
  CHECK(a.estimate.ci_loss == b.estimate.ci_loss);
  CHECK(a.standard_error.recon == b.standard_error.recon);

  McBundle c = mc_oracle_bundle(p, m, 1.0, 5000, 4, 100);
  CHECK(a.estimate.recon != c.estimate.recon);

  // n_x not a multiple of the internal batch still works
  McBundle d = mc_oracle_bundle(p, m, 1.0, 4097, 2, 7);
  CHECK(std::isfinite(d.estimate.elbo));
  CHECK(d.standard_error.recon > 0.0);

  CHECK_THROWS_AS(mc_oracle_bundle(p, m, 1.0, 0, 1, 7), std::invalid_argument);
  CHECK_THROWS_AS(mc_oracle_bundle(p, m, 1.0, 10, 0, 7), std::invalid_argument);
  CHECK_THROWS_AS(mc_oracle_bundle(p, m, 0.0, 10, 1, 7), std::invalid_argument);
}

TEST_CASE("closed-form metrics sit inside the monte carlo error bars") {
  Rng rng(804);
  int z_ok = 0, z_total = 0;
  for (int trial = 0; trial < 6; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(5));
    const int k = 1 + static_cast<int>(rng.below(2));
    MixingModel m(random_mixing(rng, n, k));
    LinearVaeParams p = random_params(rng, n, k, 0.4);
    p.dec_b.setZero();
    const double beta = 0.5 * (1 + rng.below(4));

    MetricBundle exact = metric_bundle(p, m, beta);
    McBundle mc = mc_oracle_bundle(p, m, beta, 20000, 8, 900 + trial);

    auto z = [](double est, double se, double truth) {
      return std::abs(est - truth) / std::max(se, 1e-12);
    };
    const double zs[5] = {
        z(mc.estimate.recon, mc.standard_error.recon, exact.recon),
        z(mc.estimate.ci_loss, mc.standard_error.ci_loss, exact.ci_loss),
        z(mc.estimate.elbo, mc.standard_error.elbo, exact.elbo),
        z(mc.estimate.mie, mc.standard_error.mie, exact.mie),
        z(mc.estimate.tie, mc.standard_error.tie, exact.tie)};
    for (double zv : zs) {
      CAPTURE(trial);
      CHECK(zv <= 3.0);
      z_ok += zv <= 3.0 ? 1 : 0;
      ++z_total;
    }
    CHECK(std::abs(mc.estimate.loss_value -
                   (mc.estimate.recon - beta * mc.estimate.ci_loss)) < 1e-9);
  }
  CHECK(z_ok == z_total);
}
