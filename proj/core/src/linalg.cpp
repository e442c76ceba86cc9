#include "disentangle/linalg.hpp"

#include <cmath>

#include <Eigen/LU>

namespace disent {

namespace {

void require_square(const Eigen::MatrixXd& m, const char* who) {
  if (m.rows() != m.cols() || m.rows() == 0)
    throw std::invalid_argument(std::string(who) + ": matrix must be square and non-empty");
}

}  // namespace

SpdFactor::SpdFactor(const Eigen::MatrixXd& m) {
  require_square(m, "SpdFactor");
  double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > tol::symmetry * scale)
    throw std::invalid_argument("SpdFactor: matrix is not symmetric");
  llt_.compute(((m + m.transpose()) / 2.0).eval());
  if (llt_.info() != Eigen::Success)
    throw NotSpdError("SpdFactor: matrix is not positive definite");
}

double SpdFactor::log_det() const {
  return 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
}

Eigen::VectorXd SpdFactor::solve(const Eigen::VectorXd& rhs) const {
  if (rhs.size() != dim())
    throw std::invalid_argument("SpdFactor::solve: size mismatch");
  return llt_.solve(rhs);
}

Eigen::MatrixXd SpdFactor::solve(const Eigen::MatrixXd& rhs) const {
  if (rhs.rows() != dim())
    throw std::invalid_argument("SpdFactor::solve: size mismatch");
  return llt_.solve(rhs);
}

Eigen::MatrixXd SpdFactor::inverse() const {
  return llt_.solve(Eigen::MatrixXd::Identity(dim(), dim()));
}

double gaussian_kl(const GaussianMoments& q, const GaussianMoments& p) {
  const auto d = q.mean.size();
  if (p.mean.size() != d)
    throw std::invalid_argument("gaussian_kl: dimension mismatch");
  if (q.cov.rows() != d || q.cov.cols() != d || p.cov.rows() != d || p.cov.cols() != d)
    throw std::invalid_argument("gaussian_kl: covariance shape mismatch");

  SpdFactor fq(q.cov);
  SpdFactor fp(p.cov);
  double trace = fp.solve(q.cov).trace();
  Eigen::VectorXd delta = p.mean - q.mean;
  double quad = delta.dot(fp.solve(delta));
  return 0.5 * (trace + quad - static_cast<double>(d) + fp.log_det() - fq.log_det());
}

Eigen::MatrixXd woodbury_inverse(const Eigen::MatrixXd& b,
                                 const Eigen::MatrixXd& u,
                                 const Eigen::MatrixXd& v) {
  require_square(b, "woodbury_inverse");
  const auto n = b.rows();
  const auto k = u.cols();
  if (u.rows() != n || v.cols() != n || v.rows() != k)
    throw std::invalid_argument("woodbury_inverse: shape mismatch");

  Eigen::FullPivLU<Eigen::MatrixXd> lu_b(b);
  if (!lu_b.isInvertible())
    throw SingularMatrixError("woodbury_inverse: B is singular");
  Eigen::MatrixXd b_inv = lu_b.inverse();
  Eigen::MatrixXd x = b_inv * u;  // B^{-1} U
  Eigen::MatrixXd small = Eigen::MatrixXd::Identity(k, k) + v * x;
  Eigen::FullPivLU<Eigen::MatrixXd> lu_s(small);
  if (!lu_s.isInvertible())
    throw SingularMatrixError("woodbury_inverse: I + V B^{-1} U is singular");
  return b_inv - x * lu_s.solve(v * b_inv);
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> push_through(
    const Eigen::MatrixXd& u, const Eigen::MatrixXd& v) {
  const auto n = u.rows();
  const auto k = u.cols();
  if (v.rows() != k || v.cols() != n)
    throw std::invalid_argument("push_through: shape mismatch");

  Eigen::MatrixXd big = Eigen::MatrixXd::Identity(n, n) + u * v;
  Eigen::FullPivLU<Eigen::MatrixXd> lu_big(big);
  if (!lu_big.isInvertible())
    throw SingularMatrixError("push_through: I_N + U V is singular");
  Eigen::MatrixXd lhs = lu_big.solve(u);

  Eigen::MatrixXd small = Eigen::MatrixXd::Identity(k, k) + v * u;
  Eigen::FullPivLU<Eigen::MatrixXd> lu_small(small);
  if (!lu_small.isInvertible())
    throw SingularMatrixError("push_through: I_k + V U is singular");
  Eigen::MatrixXd rhs = u * lu_small.inverse();

  return {lhs, rhs};
}

double logdet_spd(const Eigen::MatrixXd& m) { return SpdFactor(m).log_det(); }

}  // namespace disent
