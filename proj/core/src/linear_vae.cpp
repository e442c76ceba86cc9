#include "disentangle/linear_vae.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>

#include "disentangle/rng.hpp"

namespace disent {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_shapes(const LinearVaeParams& p) {
  const int n = p.data_dim();
  const int k = p.latent_dim();
  if (n < 1 || k < 1)
    throw std::invalid_argument("LinearVaeParams: empty parameter blocks");
  if (p.enc_mean_b.size() != k || p.enc_logvar_b.size() != k ||
      p.enc_logvar_w.rows() != k || p.enc_logvar_w.cols() != n ||
      p.dec_w.rows() != n || p.dec_w.cols() != k || p.dec_b.size() != n)
    throw std::invalid_argument("LinearVaeParams: inconsistent block shapes");
}

void check_cov(const LinearVaeParams& p, const Eigen::MatrixXd& sigma) {
  if (sigma.rows() != sigma.cols() || sigma.rows() != p.data_dim())
    throw std::invalid_argument("integrated_loss: covariance shape mismatch");
}

// Shared evaluation of the integrated objective and, optionally, its
// gradient. Returns false when a latent variance exponent overflows.
// All products are arranged to cost O(k N^2) at worst.
bool eval_loss(const LinearVaeParams& p, const Eigen::MatrixXd& sigma,
               double beta, double* loss, LinearVaeGrad* grad) {
  const int k = p.latent_dim();

  Eigen::MatrixXd ws = p.enc_mean_w * sigma;                 // k x N
  Eigen::MatrixXd wswt = ws * p.enc_mean_w.transpose();      // k x k
  Eigen::MatrixXd dtd = p.dec_w.transpose() * p.dec_w;       // k x k

  const bool lv_zero = p.enc_logvar_w.isZero(0.0);
  Eigen::MatrixXd vs;  // enc_logvar_w * sigma, k x N
  Eigen::VectorXd v(k);
  for (int i = 0; i < k; ++i) v[i] = p.enc_logvar_b[i];
  if (!lv_zero) {
    vs = p.enc_logvar_w * sigma;
    for (int i = 0; i < k; ++i)
      v[i] += 0.5 * vs.row(i).dot(p.enc_logvar_w.row(i));
  }
  if ((v.array() > tol::exp_arg_limit).any()) return false;
  Eigen::VectorXd e = v.array().exp();
  Eigen::VectorXd c = dtd.diagonal().array() + beta;

  Eigen::VectorXd resid_b = p.dec_w * p.enc_mean_b + p.dec_b;  // N

  if (loss) {
    double t1 = (dtd * wswt).trace() -
                2.0 * p.dec_w.cwiseProduct(ws.transpose()).sum() +
                sigma.trace();
    double t2 = wswt.trace();
    double t3 = c.dot(e);
    double t4 = resid_b.squaredNorm();
    double t5 = p.enc_mean_b.squaredNorm();
    double t6 = p.enc_logvar_b.sum();
    *loss = -0.5 * (t1 + beta * t2 + t3 + t4 + beta * t5 - beta * t6);
  }

  if (grad) {
    grad->enc_mean_w =
        -(dtd * ws + beta * ws - p.dec_w.transpose() * sigma);
    grad->enc_mean_b = -(p.dec_w.transpose() * resid_b + beta * p.enc_mean_b);
    grad->dec_w = -(p.dec_w * wswt - ws.transpose() +
                    p.dec_w * e.asDiagonal() +
                    resid_b * p.enc_mean_b.transpose());
    grad->dec_b = -resid_b;
    Eigen::VectorXd ce = c.cwiseProduct(e);
    if (lv_zero)
      grad->enc_logvar_w = Eigen::MatrixXd::Zero(k, p.data_dim());
    else
      grad->enc_logvar_w = -0.5 * (ce.asDiagonal() * vs);
    grad->enc_logvar_b = -0.5 * (ce.array() - beta).matrix();
  }
  return true;
}

// Flat parameterization of the blocks a solver mode moves.
//
// Reduced mode ascends over the decoder alone: at fixed D the objective is
// strictly concave in the encoder mean with maximizer W = (DᵀD + βI)⁻¹Dᵀ
// (the data covariance cancels), and concave in each latent log-variance
// with the usual closed form. Substituting both leaves the packed gradient
// equal to the decoder block of the full gradient (envelope argument), and
// removes the stiff encoder directions that otherwise dominate the joint
// landscape's conditioning.
struct Packing {
  SolverMode mode;
  int n = 0, k = 0;
  Eigen::MatrixXd fixed_dec;  // fixed_decoder mode only

  int dim() const {
    const int wn = k * n;
    switch (mode) {
      case SolverMode::reduced: return n * k;
      case SolverMode::full: return 2 * wn + k + n * k;
      case SolverMode::fixed_decoder: return 2 * wn + k;
    }
    return 0;
  }

  LinearVaeParams unpack(const Eigen::VectorXd& x, double beta) const {
    LinearVaeParams p = LinearVaeParams::zero(n, k);
    const int wn = k * n;
    switch (mode) {
      case SolverMode::reduced: {
        p.dec_w = Eigen::Map<const Eigen::MatrixXd>(x.data(), n, k);
        // Encoder mean and latent variance at their conditional optima.
        Eigen::MatrixXd gram = p.dec_w.transpose() * p.dec_w;
        for (int i = 0; i < k; ++i)
          p.enc_logvar_b[i] = std::log(beta / (gram(i, i) + beta));
        gram.diagonal().array() += beta;
        p.enc_mean_w =
            gram.llt().solve(Eigen::MatrixXd(p.dec_w.transpose()));
        break;
      }
      case SolverMode::full: {
        p.enc_mean_w = Eigen::Map<const Eigen::MatrixXd>(x.data(), k, n);
        p.enc_logvar_w = Eigen::Map<const Eigen::MatrixXd>(x.data() + wn, k, n);
        p.enc_logvar_b = x.segment(2 * wn, k);
        p.dec_w = Eigen::Map<const Eigen::MatrixXd>(x.data() + 2 * wn + k, n, k);
        break;
      }
      case SolverMode::fixed_decoder: {
        p.enc_mean_w = Eigen::Map<const Eigen::MatrixXd>(x.data(), k, n);
        p.enc_logvar_w = Eigen::Map<const Eigen::MatrixXd>(x.data() + wn, k, n);
        p.enc_logvar_b = x.segment(2 * wn, k);
        p.dec_w = fixed_dec;
        break;
      }
    }
    return p;
  }

  Eigen::VectorXd pack(const LinearVaeParams& p) const {
    Eigen::VectorXd x(dim());
    const int wn = k * n;
    switch (mode) {
      case SolverMode::reduced:
        Eigen::Map<Eigen::MatrixXd>(x.data(), n, k) = p.dec_w;
        break;
      case SolverMode::full:
        Eigen::Map<Eigen::MatrixXd>(x.data(), k, n) = p.enc_mean_w;
        Eigen::Map<Eigen::MatrixXd>(x.data() + wn, k, n) = p.enc_logvar_w;
        x.segment(2 * wn, k) = p.enc_logvar_b;
        Eigen::Map<Eigen::MatrixXd>(x.data() + 2 * wn + k, n, k) = p.dec_w;
        break;
      case SolverMode::fixed_decoder:
        Eigen::Map<Eigen::MatrixXd>(x.data(), k, n) = p.enc_mean_w;
        Eigen::Map<Eigen::MatrixXd>(x.data() + wn, k, n) = p.enc_logvar_w;
        x.segment(2 * wn, k) = p.enc_logvar_b;
        break;
    }
    return x;
  }

  Eigen::VectorXd pack_grad(const LinearVaeGrad& g) const {
    // Same layout as pack(); blocks held at conditional optima are
    // stationary by construction, so their gradients never enter.
    return pack(g);
  }

  // Loss, or -inf on variance overflow; gradient of the free blocks.
  double eval(const Eigen::VectorXd& x, double beta,
              Eigen::VectorXd* g) const {
    LinearVaeParams p = unpack(x, beta);
    double loss;
    LinearVaeGrad grad;
    if (!eval_loss(p, sigma(), beta, &loss, g ? &grad : nullptr))
      return kNegInf;
    if (g) *g = pack_grad(grad);
    return loss;
  }

  const Eigen::MatrixXd& sigma() const { return *sigma_; }
  const Eigen::MatrixXd* sigma_ = nullptr;
};

LinearVaeParams random_start(const Packing& pk, const SolverConfig& cfg,
                             Rng& rng) {
  LinearVaeParams p = LinearVaeParams::zero(pk.n, pk.k);
  p.enc_mean_w = cfg.init_scale * rng.normal_matrix(pk.k, pk.n);
  if (cfg.mode == SolverMode::full || cfg.mode == SolverMode::fixed_decoder) {
    p.enc_logvar_w = cfg.init_scale * rng.normal_matrix(pk.k, pk.n);
    p.enc_logvar_b = cfg.init_scale * rng.normal_vector(pk.k);
  }
  p.dec_w = (cfg.mode == SolverMode::fixed_decoder)
                ? pk.fixed_dec
                : Eigen::MatrixXd(cfg.init_scale * rng.normal_matrix(pk.n, pk.k));
  return p;
}

bool better_candidate(const StationaryPoint& a, const StationaryPoint& b) {
  // true when a should replace b
  if (a.converged != b.converged) return a.converged;
  if (std::abs(a.loss - b.loss) > 1e-10) return a.loss > b.loss;
  return a.residual < b.residual;
}

}  // namespace

LinearVaeParams LinearVaeParams::zero(int data_dim, int latent_dim) {
  LinearVaeParams p;
  p.enc_mean_w = Eigen::MatrixXd::Zero(latent_dim, data_dim);
  p.enc_mean_b = Eigen::VectorXd::Zero(latent_dim);
  p.enc_logvar_w = Eigen::MatrixXd::Zero(latent_dim, data_dim);
  p.enc_logvar_b = Eigen::VectorXd::Zero(latent_dim);
  p.dec_w = Eigen::MatrixXd::Zero(data_dim, latent_dim);
  p.dec_b = Eigen::VectorXd::Zero(data_dim);
  return p;
}

GaussianMoments encode(const LinearVaeParams& p, const Eigen::VectorXd& x) {
  check_shapes(p);
  if (x.size() != p.data_dim())
    throw std::invalid_argument("encode: input dimension mismatch");
  Eigen::VectorXd logvar = p.enc_logvar_w * x + p.enc_logvar_b;
  if ((logvar.array() > tol::exp_arg_limit).any())
    throw std::overflow_error("encode: latent variance exponent overflow");
  GaussianMoments g;
  g.mean = p.enc_mean_w * x + p.enc_mean_b;
  g.cov = logvar.array().exp().matrix().asDiagonal();
  return g;
}

double integrated_loss(const LinearVaeParams& p, const Eigen::MatrixXd& sigma_x,
                       double beta) {
  check_shapes(p);
  check_cov(p, sigma_x);
  if (!(beta > 0)) throw std::invalid_argument("integrated_loss: beta must be positive");
  double loss;
  if (!eval_loss(p, sigma_x, beta, &loss, nullptr))
    throw std::overflow_error("integrated_loss: latent variance exponent overflow");
  return loss;
}

LinearVaeGrad loss_gradient(const LinearVaeParams& p,
                            const Eigen::MatrixXd& sigma_x, double beta) {
  check_shapes(p);
  check_cov(p, sigma_x);
  if (!(beta > 0)) throw std::invalid_argument("loss_gradient: beta must be positive");
  LinearVaeGrad g;
  if (!eval_loss(p, sigma_x, beta, nullptr, &g))
    throw std::overflow_error("loss_gradient: latent variance exponent overflow");
  return g;
}

namespace detail {

double stationarity_residual(const LinearVaeParams& p,
                             const Eigen::MatrixXd& sigma_x, double beta,
                             SolverMode mode) {
  LinearVaeGrad g = loss_gradient(p, sigma_x, beta);
  double r = g.enc_mean_w.cwiseAbs().maxCoeff();
  if (mode != SolverMode::fixed_decoder)
    r = std::max(r, g.dec_w.cwiseAbs().maxCoeff());
  if (mode != SolverMode::reduced) {
    r = std::max(r, g.enc_logvar_w.cwiseAbs().maxCoeff());
    r = std::max(r, g.enc_logvar_b.cwiseAbs().maxCoeff());
  }
  return r;
}

StationaryPoint ascend_from(const LinearVaeParams& start,
                            const Eigen::MatrixXd& sigma_x, double beta,
                            const SolverConfig& cfg,
                            std::vector<double>* trace) {
  Packing pk{cfg.mode, static_cast<int>(sigma_x.rows()), start.latent_dim(),
             cfg.fixed_decoder};
  pk.sigma_ = &sigma_x;

  Eigen::VectorXd x = pk.pack(start);
  Eigen::VectorXd g(pk.dim()), g_new(pk.dim());
  double f = pk.eval(x, beta, &g);
  if (trace && std::isfinite(f)) trace->push_back(f);

  // Gradient ascent with a backtracking (halving) line search. Trial steps
  // come from a spectral (secant) estimate. Far from stationarity the usual
  // Armijo sufficient-increase test certifies progress; once the predicted
  // increase c1*alpha*|g|^2 drops below the rounding floor of the objective
  // that test is blind (the true increase per step is smaller than one ulp
  // of the loss), so acceptance switches to a strict decrease of the
  // gradient norm at numerically non-decreasing objective. Either way only
  // uphill moves are accepted and the recorded objective never decreases.
  const double c1 = 1e-4;
  const double eps = std::numeric_limits<double>::epsilon();
  // Evaluation roughness of the objective: the reconstruction part cancels
  // terms of magnitude ~tr(Sigma), so repeated evaluations near the same
  // point jitter at this scale times machine epsilon.
  const double f_scale = 1.0 + std::abs(f) + sigma_x.trace();
  double step = 1.0 / std::max(1.0, g.lpNorm<Eigen::Infinity>());
  Eigen::VectorXd dx, dg, x_new;
  bool have_secant = false;
  bool floor_phase = false;
  double alpha_hi = step;  // largest accepted step so far (floor phase)
  int floor_iter = 0;

  if (std::isfinite(f)) {
    double gg = g.squaredNorm();
    for (int iter = 0; iter < cfg.max_iters; ++iter) {
      if (g.lpNorm<Eigen::Infinity>() <= cfg.grad_tol) break;

      double alpha = 2.0 * step;
      if (have_secant) {
        double sy = dx.dot(dg);
        if (sy < 0) alpha = -dx.squaredNorm() / sy;
      }
      alpha = std::clamp(alpha, 1e-18, 1e12);

      const double f_floor = 64.0 * eps * f_scale;
      bool accepted = false;
      double f_new = kNegInf;
      if (!floor_phase && c1 * alpha * gg > f_floor) {
        for (int h = 0; h < 80; ++h) {
          x_new = x + alpha * g;
          f_new = pk.eval(x_new, beta, nullptr);
          if (f_new >= f + c1 * alpha * gg) {
            accepted = true;
            break;
          }
          alpha *= 0.5;
          if (c1 * alpha * gg <= f_floor) break;  // increase unmeasurable
        }
        if (accepted) f_new = pk.eval(x_new, beta, &g_new);
      }
      if (!accepted) {
        if (!floor_phase) {
          floor_phase = true;
          alpha_hi = step;
        }
        // The secant step after a stiff correction underestimates what the
        // soft directions can take, so every few iterations probe past the
        // largest step accepted so far; rejected probes just halve away.
        alpha = (++floor_iter % 4 == 0)
                    ? std::min(4.0 * alpha_hi, 1e12)
                    : std::min(alpha, 256.0 * step);
        for (int h = 0; h < 80; ++h) {
          x_new = x + alpha * g;
          f_new = pk.eval(x_new, beta, &g_new);
          if (g_new.squaredNorm() < gg && f_new >= f - f_floor) {
            accepted = true;
            break;
          }
          alpha *= 0.5;
        }
        if (accepted) alpha_hi = std::max(alpha_hi, alpha);
      }
      if (!accepted) break;  // stationary at this resolution

      dx = x_new - x;
      dg = g_new - g;
      have_secant = true;
      x.swap(x_new);
      g.swap(g_new);
      gg = g.squaredNorm();
      f = std::max(f, f_new);
      step = alpha;
      if (trace) trace->push_back(f);
    }
  }

  StationaryPoint out;
  out.params = pk.unpack(x, beta);
  out.beta = beta;
  out.loss = f;
  out.residual = std::isfinite(f)
                     ? stationarity_residual(out.params, sigma_x, beta, cfg.mode)
                     : std::numeric_limits<double>::infinity();
  out.converged = out.residual <= cfg.grad_tol;
  return out;
}

}  // namespace detail

StationaryPoint solve_stationary_cov(const Eigen::MatrixXd& sigma_x,
                                     int latent_dim, double beta,
                                     const SolverConfig& cfg,
                                     const LinearVaeParams* warm_start) {
  if (sigma_x.rows() != sigma_x.cols() || sigma_x.rows() < 1)
    throw std::invalid_argument("solve_stationary: covariance must be square");
  if (latent_dim < 1)
    throw std::invalid_argument("solve_stationary: latent_dim must be positive");
  if (!(beta > 0))
    throw std::invalid_argument("solve_stationary: beta must be positive");
  if (cfg.mode == SolverMode::fixed_decoder &&
      (cfg.fixed_decoder.rows() != sigma_x.rows() ||
       cfg.fixed_decoder.cols() != latent_dim))
    throw std::invalid_argument("solve_stationary: fixed decoder shape mismatch");

  const int n = static_cast<int>(sigma_x.rows());
  Packing pk{cfg.mode, n, latent_dim, cfg.fixed_decoder};
  pk.sigma_ = &sigma_x;

  std::optional<StationaryPoint> best;
  auto consider = [&](const StationaryPoint& sp) {
    if (!best || better_candidate(sp, *best)) best = sp;
  };

  if (warm_start) {
    LinearVaeParams w = *warm_start;
    w.enc_mean_b.setZero();
    w.dec_b.setZero();
    if (cfg.mode == SolverMode::fixed_decoder) w.dec_w = cfg.fixed_decoder;
    consider(detail::ascend_from(w, sigma_x, beta, cfg));
  }

  const auto beta_bits = std::bit_cast<std::uint64_t>(beta);
  for (int r = 0; r < cfg.restarts; ++r) {
    Rng rng(derive_seed(cfg.seed, "linear-solver", beta_bits,
                        static_cast<std::uint64_t>(r)));
    LinearVaeParams start = random_start(pk, cfg, rng);
    consider(detail::ascend_from(start, sigma_x, beta, cfg));
  }

  if (!best) throw std::invalid_argument("solve_stationary: restarts must be positive");
  StationaryPoint sp = *best;
  if (cfg.mode != SolverMode::fixed_decoder) {
    sp.params = canonicalize(sp.params);
    sp.residual = detail::stationarity_residual(sp.params, sigma_x, beta, cfg.mode);
    sp.loss = integrated_loss(sp.params, sigma_x, beta);
  }
  return sp;
}

StationaryPoint solve_stationary(const MixingModel& m, double beta,
                                 const SolverConfig& cfg,
                                 const LinearVaeParams* warm_start) {
  return solve_stationary_cov(data_covariance(m), m.source_dim(), beta, cfg,
                              warm_start);
}

PosteriorMap model_posterior(const LinearVaeParams& p) {
  check_shapes(p);
  if (p.dec_b.cwiseAbs().maxCoeff() > 0.0)
    throw std::invalid_argument("model_posterior: decoder bias must be zero");
  const int k = p.latent_dim();
  Eigen::MatrixXd gram =
      p.dec_w.transpose() * p.dec_w + Eigen::MatrixXd::Identity(k, k);
  SpdFactor f(gram);
  return PosteriorMap{f.solve(Eigen::MatrixXd(p.dec_w.transpose())), f.inverse()};
}

LinearVaeParams canonicalize(const LinearVaeParams& p) {
  check_shapes(p);
  const int k = p.latent_dim();

  std::vector<int> order(k);
  std::iota(order.begin(), order.end(), 0);
  Eigen::VectorXd norms = p.dec_w.colwise().norm();
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return norms[a] > norms[b]; });

  LinearVaeParams q = p;
  for (int j = 0; j < k; ++j) {
    const int src = order[j];
    int arg = 0;
    p.dec_w.col(src).cwiseAbs().maxCoeff(&arg);
    const double s = p.dec_w(arg, src) < 0.0 ? -1.0 : 1.0;
    q.dec_w.col(j) = s * p.dec_w.col(src);
    q.enc_mean_w.row(j) = s * p.enc_mean_w.row(src);
    q.enc_mean_b[j] = s * p.enc_mean_b[src];
    q.enc_logvar_w.row(j) = p.enc_logvar_w.row(src);  // variance has no sign
    q.enc_logvar_b[j] = p.enc_logvar_b[src];
  }
  return q;
}

}  // namespace disent
