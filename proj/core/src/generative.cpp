#include "disentangle/generative.hpp"

#include "disentangle/rng.hpp"

namespace disent {

MixingModel::MixingModel(Eigen::MatrixXd a) : mixing(std::move(a)) {
  if (mixing.rows() < 1 || mixing.cols() < 1)
    throw std::invalid_argument("MixingModel: mixing matrix must be non-empty");
  if (mixing.rows() < mixing.cols())
    throw std::invalid_argument("MixingModel: need data_dim >= source_dim");
  if (!mixing.allFinite())
    throw std::invalid_argument("MixingModel: mixing matrix must be finite");
}

Eigen::MatrixXd data_covariance(const MixingModel& m) {
  const int n = m.data_dim();
  return m.mixing * m.mixing.transpose() + Eigen::MatrixXd::Identity(n, n);
}

PosteriorMap ground_truth_posterior(const MixingModel& m) {
  const int k = m.source_dim();
  Eigen::MatrixXd gram = m.mixing.transpose() * m.mixing +
                         Eigen::MatrixXd::Identity(k, k);
  SpdFactor f(gram);
  return PosteriorMap{f.solve(Eigen::MatrixXd(m.mixing.transpose())), f.inverse()};
}

SampleSet sample_data(const MixingModel& m, int n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample_data: n must be positive");
  Rng rng(derive_seed(seed, "generative.sample_data"));
  SampleSet out;
  out.sources = rng.normal_matrix(n, m.source_dim());
  out.observations = out.sources * m.mixing.transpose() +
                     rng.normal_matrix(n, m.data_dim());
  return out;
}

}  // namespace disent
