#include <doctest.h>

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "disentangle/linalg.hpp"
#include "disentangle/rng.hpp"
#include "test_support.hpp"

using namespace disent;
using testsup::max_abs;
using testsup::max_abs_diff;
using testsup::random_spd;

TEST_CASE("SpdFactor agrees with a pivoted LU inverse") {
  Rng rng(100);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(8));
    Eigen::MatrixXd m = random_spd(rng, n);
    SpdFactor f(m);
    CHECK(f.dim() == n);

    Eigen::MatrixXd inv_lu = m.fullPivLu().inverse();
    CHECK(max_abs_diff(f.inverse(), inv_lu) <= tol::identity);
    CHECK(max_abs_diff(m * f.inverse(), Eigen::MatrixXd::Identity(n, n)) <=
          tol::identity);

    Eigen::VectorXd rhs = rng.normal_vector(n);
    CHECK(max_abs(f.solve(rhs) - inv_lu * rhs) <= tol::identity);

    // log det via eigenvalues as the second opinion
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    double ld = 0.0;
    for (int i = 0; i < n; ++i) ld += std::log(es.eigenvalues()[i]);
    CHECK(std::abs(f.log_det() - ld) <= 1e-9 * std::max(1.0, std::abs(ld)));
    CHECK(logdet_spd(m) == f.log_det());
  }
}

TEST_CASE("SpdFactor hand case") {
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(2, 2) * 2.0;
  SpdFactor f(m);
  CHECK(std::abs(f.log_det() - 2.0 * std::numbers::ln2) < 1e-15);
  CHECK(max_abs_diff(f.inverse(), Eigen::MatrixXd::Identity(2, 2) * 0.5) <
        1e-15);
}

TEST_CASE("SpdFactor rejects bad input") {
  CHECK_THROWS_AS(SpdFactor(Eigen::MatrixXd::Zero(2, 3)),
                  std::invalid_argument);

  Eigen::MatrixXd asym(2, 2);
  asym << 1.0, 0.5, -0.5, 1.0;  // asymmetry far above the repair threshold
  CHECK_THROWS_AS(SpdFactor{asym}, std::invalid_argument);

  Eigen::MatrixXd nsd = -Eigen::MatrixXd::Identity(3, 3);
  CHECK_THROWS_AS(SpdFactor{nsd}, NotSpdError);

  // tiny asymmetry is symmetrized, not rejected
  Eigen::MatrixXd nearly = Eigen::MatrixXd::Identity(2, 2);
  nearly(0, 1) = 1e-13;
  CHECK_NOTHROW(SpdFactor{nearly});
}

TEST_CASE("gaussian_kl closed-form scalar cases") {
  GaussianMoments q, p;
  q.mean = Eigen::VectorXd::Zero(1);
  q.cov = Eigen::MatrixXd::Constant(1, 1, 0.5);
  p.mean = Eigen::VectorXd::Zero(1);
  p.cov = Eigen::MatrixXd::Identity(1, 1);
  // 0.5*(0.5 - 1 + ln 2)
  CHECK(std::abs(gaussian_kl(q, p) - 0.096573590279972654) < 1e-15);

  q.cov = Eigen::MatrixXd::Identity(1, 1);
  q.mean[0] = 1.0;
  CHECK(std::abs(gaussian_kl(q, p) - 0.5) < 1e-15);

  q.mean[0] = 0.0;
  CHECK(std::abs(gaussian_kl(q, p)) <= tol::kl_slack);
}

TEST_CASE("gaussian_kl properties on random moments") {
  Rng rng(200);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(5));
    GaussianMoments q{rng.normal_vector(n), random_spd(rng, n)};
    GaussianMoments p{rng.normal_vector(n), random_spd(rng, n)};

    CHECK(gaussian_kl(q, p) >= -tol::kl_slack);
    CHECK(std::abs(gaussian_kl(q, q)) <= 1e-12);

    // invariance under a joint rotation
    Eigen::MatrixXd r =
        Eigen::HouseholderQR<Eigen::MatrixXd>(rng.normal_matrix(n, n))
            .householderQ();
    GaussianMoments qr{r * q.mean, r * q.cov * r.transpose()};
    GaussianMoments pr{r * p.mean, r * p.cov * r.transpose()};
    CHECK(std::abs(gaussian_kl(qr, pr) - gaussian_kl(q, p)) <
          1e-8 * std::max(1.0, gaussian_kl(q, p)));
  }

  GaussianMoments a{Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2)};
  GaussianMoments b{Eigen::VectorXd::Zero(3), Eigen::MatrixXd::Identity(3, 3)};
  CHECK_THROWS_AS(gaussian_kl(a, b), std::invalid_argument);
}

TEST_CASE("woodbury_inverse scalar hand case") {
  Eigen::MatrixXd b = Eigen::MatrixXd::Constant(1, 1, 2.0);
  Eigen::MatrixXd u = Eigen::MatrixXd::Constant(1, 1, 1.0);
  Eigen::MatrixXd v = Eigen::MatrixXd::Constant(1, 1, 1.0);
  CHECK(std::abs(woodbury_inverse(b, u, v)(0, 0) - 1.0 / 3.0) < 1e-15);
}

TEST_CASE("woodbury and push-through identities over random instances") {
  Rng rng(300);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(7));
    const int k = 1 + static_cast<int>(rng.below(3));
    Eigen::MatrixXd b = random_spd(rng, n);
    Eigen::MatrixXd u = rng.normal_matrix(n, k);
    Eigen::MatrixXd v = rng.normal_matrix(k, n);

    Eigen::MatrixXd w = woodbury_inverse(b, u, v);
    CHECK(max_abs_diff((b + u * v) * w, Eigen::MatrixXd::Identity(n, n)) <=
          tol::identity);

    auto [lhs, rhs] = push_through(u, v);
    CHECK(max_abs_diff(lhs, rhs) <= tol::identity);
    Eigen::MatrixXd direct =
        (Eigen::MatrixXd::Identity(n, n) + u * v).fullPivLu().solve(u);
    CHECK(max_abs_diff(lhs, direct) <= tol::identity);
  }
}

TEST_CASE("woodbury error taxonomy") {
  Eigen::MatrixXd b = Eigen::MatrixXd::Identity(2, 2);
  Eigen::MatrixXd u = Eigen::MatrixXd::Ones(2, 1);
  Eigen::MatrixXd v = Eigen::MatrixXd::Ones(1, 3);  // shape mismatch
  CHECK_THROWS_AS(woodbury_inverse(b, u, v), std::invalid_argument);

  // B + UV singular: B = I, UV = -I
  Eigen::MatrixXd u2 = -Eigen::MatrixXd::Identity(2, 2);
  Eigen::MatrixXd v2 = Eigen::MatrixXd::Identity(2, 2);
  CHECK_THROWS_AS(woodbury_inverse(b, u2, v2), SingularMatrixError);
}
