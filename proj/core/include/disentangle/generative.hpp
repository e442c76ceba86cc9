#pragma once

#include <cstdint>

#include <Eigen/Core>

#include "disentangle/linalg.hpp"

namespace disent {

// Linear-Gaussian data generator: x = A s + eta with s ~ N(0, I_k) and
// eta ~ N(0, I_N). A is the N x k mixing matrix, N >= k >= 1.
struct MixingModel {
  Eigen::MatrixXd mixing;

  MixingModel() = default;
  explicit MixingModel(Eigen::MatrixXd a);

  int data_dim() const { return static_cast<int>(mixing.rows()); }
  int source_dim() const { return static_cast<int>(mixing.cols()); }
};

// Affine Gaussian posterior: z | x ~ N(mean_map * x, cov).
// mean_map is k x N, cov is k x k SPD.
struct PosteriorMap {
  Eigen::MatrixXd mean_map;
  Eigen::MatrixXd cov;
};

// Paired draws from the generator; row i of observations is
// sources.row(i) * A^T plus fresh unit noise.
struct SampleSet {
  Eigen::MatrixXd sources;       // n x k
  Eigen::MatrixXd observations;  // n x N
};

// Marginal data covariance A A^T + I_N.
Eigen::MatrixXd data_covariance(const MixingModel& m);

// Exact posterior of the sources given data:
// mean_map = (A^T A + I_k)^{-1} A^T, cov = (A^T A + I_k)^{-1}.
PosteriorMap ground_truth_posterior(const MixingModel& m);

// n paired (source, observation) draws, deterministic in (m, n, seed).
SampleSet sample_data(const MixingModel& m, int n, std::uint64_t seed);

}  // namespace disent
