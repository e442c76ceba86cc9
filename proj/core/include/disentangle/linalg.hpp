#pragma once

#include <stdexcept>
#include <utility>

#include <Eigen/Cholesky>
#include <Eigen/Core>

namespace disent {

// Numerical guard rails shared by the dense-matrix helpers and their tests.
namespace tol {
// Relative asymmetry accepted before a matrix is symmetrized for a
// symmetric factorization; anything larger is an error, not a repair.
inline constexpr double symmetry = 1e-10;
// KL divergences may dip this far below zero from round-off.
inline constexpr double kl_slack = 1e-12;
// Max-abs slack for exact algebraic identities (inverse products, etc.).
inline constexpr double identity = 1e-9;
// Argument bound for exp() in closed-form expressions; beyond this the
// caller gets an overflow error instead of a clamped value.
inline constexpr double exp_arg_limit = 700.0;
}  // namespace tol

struct NotSpdError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SingularMatrixError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Mean and covariance of a Gaussian. The covariance must be symmetric
// positive definite wherever a factorization is taken.
struct GaussianMoments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

// One shared Cholesky path for every SPD solve and log-determinant.
// Symmetrizes (M + M^T)/2 when the relative asymmetry is below
// tol::symmetry, throws NotSpdError when the factorization fails.
class SpdFactor {
 public:
  explicit SpdFactor(const Eigen::MatrixXd& m);

  int dim() const { return static_cast<int>(llt_.matrixLLT().rows()); }
  double log_det() const;
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const;
  Eigen::MatrixXd inverse() const;

 private:
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

// KL(q || p) between Gaussians of equal dimension. Non-negative up to
// tol::kl_slack; zero when the moments coincide.
double gaussian_kl(const GaussianMoments& q, const GaussianMoments& p);

// (B + U V)^{-1} through the k-dimensional correction
// B^{-1} - B^{-1} U (I_k + V B^{-1} U)^{-1} V B^{-1}.
// B is N x N invertible, U is N x k, V is k x N.
Eigen::MatrixXd woodbury_inverse(const Eigen::MatrixXd& b,
                                 const Eigen::MatrixXd& u,
                                 const Eigen::MatrixXd& v);

// Both sides of (I_N + U V)^{-1} U = U (I_k + V U)^{-1}, in that order.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> push_through(
    const Eigen::MatrixXd& u, const Eigen::MatrixXd& v);

// log det of an SPD matrix via the shared factorization.
double logdet_spd(const Eigen::MatrixXd& m);

}  // namespace disent
