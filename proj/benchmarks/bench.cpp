#include <benchmark/benchmark.h>

#include <Eigen/Dense>

#include "disentangle/generative.hpp"
#include "disentangle/linalg.hpp"
#include "disentangle/linear_vae.hpp"
#include "disentangle/metrics.hpp"
#include "disentangle/mlp_vae.hpp"
#include "disentangle/rng.hpp"

namespace {

using namespace disent;

Eigen::MatrixXd headline_mixing(int n, int k) {
  Eigen::MatrixXd a(n, k);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < k; ++c) a(r, c) = 0.5 + (r == c ? 0.5 : 0.0);
  return a;
}

LinearVaeParams bench_params(int n, int k, std::uint64_t seed) {
  Rng rng(seed);
  LinearVaeParams p = LinearVaeParams::zero(n, k);
  p.enc_mean_w = 0.3 * rng.normal_matrix(k, n);
  p.enc_logvar_w = 0.05 * rng.normal_matrix(k, n);
  p.enc_logvar_b = -0.5 * Eigen::VectorXd::Ones(k);
  p.dec_w = 0.3 * rng.normal_matrix(n, k);
  return p;
}

void bm_integrated_loss_n128(benchmark::State& state) {
  const MixingModel m(headline_mixing(128, 2));
  const Eigen::MatrixXd sigma = data_covariance(m);
  const LinearVaeParams p = bench_params(128, 2, 7);
  for (auto _ : state)
    benchmark::DoNotOptimize(integrated_loss(p, sigma, 1.0));
}
BENCHMARK(bm_integrated_loss_n128);

void bm_loss_gradient_n128(benchmark::State& state) {
  const MixingModel m(headline_mixing(128, 2));
  const Eigen::MatrixXd sigma = data_covariance(m);
  const LinearVaeParams p = bench_params(128, 2, 7);
  for (auto _ : state)
    benchmark::DoNotOptimize(loss_gradient(p, sigma, 1.0));
}
BENCHMARK(bm_loss_gradient_n128);

void bm_gaussian_kl_k16(benchmark::State& state) {
  Rng rng(11);
  const int k = 16;
  const Eigen::MatrixXd a = rng.normal_matrix(k, k);
  const Eigen::MatrixXd b = rng.normal_matrix(k, k);
  GaussianMoments q{rng.normal_vector(k),
                    a * a.transpose() + Eigen::MatrixXd::Identity(k, k)};
  GaussianMoments p{rng.normal_vector(k),
                    b * b.transpose() + Eigen::MatrixXd::Identity(k, k)};
  for (auto _ : state) benchmark::DoNotOptimize(gaussian_kl(q, p));
}
BENCHMARK(bm_gaussian_kl_k16);

void bm_solve_stationary_n8(benchmark::State& state) {
  const MixingModel m(headline_mixing(8, 2));
  SolverConfig cfg;
  cfg.restarts = 2;
  cfg.seed = 3;
  for (auto _ : state)
    benchmark::DoNotOptimize(solve_stationary(m, 1.0, cfg));
}
BENCHMARK(bm_solve_stationary_n8);

void bm_mlp_train_step(benchmark::State& state) {
  Rng rng(5);
  MlpVae net = MlpVae::build(1600, 2, {256, 200, 200}, 19);
  const Eigen::MatrixXd batch = rng.normal_matrix(100, 1600);
  const Eigen::MatrixXd eps = rng.normal_matrix(100, 2);
  MlpVae grads = zeros_like(net);
  for (auto _ : state)
    benchmark::DoNotOptimize(loss_and_grad(net, batch, 1.0, eps, &grads));
}
BENCHMARK(bm_mlp_train_step);

}  // namespace

BENCHMARK_MAIN();
