#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "commands.hpp"
#include "disentangle/data_io.hpp"
#include "disentangle/linear_vae.hpp"
#include "disentangle/metrics.hpp"
#include "disentangle/mlp_vae.hpp"
#include "disentangle/rng.hpp"
#include "disentangle/sweep.hpp"
#include "disentangle/textio.hpp"
#include "run_config.hpp"

namespace disent::cli {

namespace {

struct CheckOutcome {
  bool pass = false;
  std::string detail;
};

std::string fmt_short(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

double max_abs(const Eigen::MatrixXd& m) {
  return m.size() ? m.cwiseAbs().maxCoeff() : 0.0;
}

LinearVaeParams random_params(Rng& rng, int n, int k, double scale,
                              bool zero_dec_b) {
  LinearVaeParams p = LinearVaeParams::zero(n, k);
  p.enc_mean_w = scale * rng.normal_matrix(k, n);
  p.enc_mean_b = scale * rng.normal_vector(k);
  p.enc_logvar_w = scale * rng.normal_matrix(k, n);
  p.enc_logvar_b = scale * rng.normal_vector(k);
  p.dec_w = scale * rng.normal_matrix(n, k);
  p.dec_b = zero_dec_b ? Eigen::VectorXd::Zero(n).eval()
                       : (scale * rng.normal_vector(n)).eval();
  return p;
}

// ---- individual checks ----------------------------------------------

CheckOutcome check_matrix_identities(std::uint64_t seed) {
  Rng rng(derive_seed(seed, "check-identities"));
  double worst = 0.0;
  for (int it = 0; it < 100; ++it) {
    const int n = 2 + static_cast<int>(rng.below(5));
    const int k = 1 + static_cast<int>(rng.below(
                          static_cast<std::uint64_t>(std::min(n, 3))));
    const Eigen::MatrixXd r = rng.normal_matrix(n, n);
    const Eigen::MatrixXd b =
        r * r.transpose() + Eigen::MatrixXd::Identity(n, n);
    const Eigen::MatrixXd u = rng.normal_matrix(n, k);
    const Eigen::MatrixXd v = rng.normal_matrix(k, n);

    const Eigen::MatrixXd direct = (b + u * v).fullPivLu().inverse();
    worst = std::max(worst, max_abs(woodbury_inverse(b, u, v) - direct));

    const auto [lhs, rhs] = push_through(u, v);
    worst = std::max(worst, max_abs(lhs - rhs));

    const MixingModel m(rng.normal_matrix(n, k));
    const PosteriorMap post = ground_truth_posterior(m);
    const Eigen::MatrixXd resid =
        post.cov - (Eigen::MatrixXd::Identity(k, k) -
                    post.mean_map * m.mixing);
    worst = std::max(worst, max_abs(resid));
  }
  return {worst <= 1e-10, "max_err=" + fmt_short(worst) + " tol=1e-10"};
}

CheckOutcome check_posterior_mc(std::uint64_t seed) {
  Rng rng(derive_seed(seed, "check-posterior"));
  const MixingModel m(rng.normal_matrix(3, 2));
  const int n = 100000;
  const SampleSet data =
      sample_data(m, n, derive_seed(seed, "check-posterior-data"));
  const PosteriorMap post = ground_truth_posterior(m);

  // s - F x has mean 0 and covariance E for every x, so the pooled
  // residual moments estimate the conditional ones.
  const Eigen::MatrixXd resid =
      data.sources - data.observations * post.mean_map.transpose();
  const Eigen::RowVectorXd mean = resid.colwise().mean();
  const Eigen::MatrixXd cov =
      resid.transpose() * resid / double(n) - mean.transpose() * mean;
  const double err =
      std::max(max_abs(mean), max_abs(cov - post.cov));
  return {err <= 0.02, "max_err=" + fmt_short(err) + " tol=0.02"};
}

std::vector<std::pair<double*, std::size_t>> param_coords(LinearVaeParams& p) {
  return {{p.enc_mean_w.data(), static_cast<std::size_t>(p.enc_mean_w.size())},
          {p.enc_mean_b.data(), static_cast<std::size_t>(p.enc_mean_b.size())},
          {p.enc_logvar_w.data(),
           static_cast<std::size_t>(p.enc_logvar_w.size())},
          {p.enc_logvar_b.data(),
           static_cast<std::size_t>(p.enc_logvar_b.size())},
          {p.dec_w.data(), static_cast<std::size_t>(p.dec_w.size())},
          {p.dec_b.data(), static_cast<std::size_t>(p.dec_b.size())}};
}

CheckOutcome check_linear_gradients(std::uint64_t seed) {
  double worst = 0.0;
  for (int pt = 0; pt < 5; ++pt) {
    Rng rng(derive_seed(seed, "check-lingrad", static_cast<std::uint64_t>(pt)));
    const int n = 1 + static_cast<int>(rng.below(4));
    const int k =
        1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    const Eigen::MatrixXd b = rng.normal_matrix(n, n);
    const Eigen::MatrixXd sigma =
        b * b.transpose() / n + Eigen::MatrixXd::Identity(n, n);
    const double beta = 0.3 + 2.7 * rng.uniform();
    LinearVaeParams p = random_params(rng, n, k, 0.5, false);

    LinearVaeGrad an = loss_gradient(p, sigma, beta);
    auto pc = param_coords(p);
    auto ac = param_coords(an);
    for (std::size_t blk = 0; blk < pc.size(); ++blk) {
      for (std::size_t i = 0; i < pc[blk].second; ++i) {
        double& x = pc[blk].first[i];
        const double x0 = x;
        const double h = 1e-6 * std::max(1.0, std::abs(x0));
        x = x0 + h;
        const double up = integrated_loss(p, sigma, beta);
        x = x0 - h;
        const double dn = integrated_loss(p, sigma, beta);
        x = x0;
        const double fd = (up - dn) / (2 * h);
        const double gan = ac[blk].first[i];
        worst = std::max(worst,
                         std::abs(fd - gan) / std::max(1.0, std::abs(gan)));
      }
    }
  }
  return {worst <= 1e-6, "max_relerr=" + fmt_short(worst) + " tol=1e-6"};
}

CheckOutcome check_deep_gradients(std::uint64_t seed) {
  double worst = 0.0;
  for (int pt = 0; pt < 2; ++pt) {
    Rng rng(derive_seed(seed, "check-deepgrad",
                        static_cast<std::uint64_t>(pt)));
    const int in = 6, k = 2;
    MlpVae net = MlpVae::build(in, k, {5, 4},
                               derive_seed(seed, "check-deepnet",
                                           static_cast<std::uint64_t>(pt)));
    for (DenseLayer* l : layer_list(net))
      l->b += 0.1 * rng.normal_vector(static_cast<int>(l->b.size()));
    const Eigen::MatrixXd batch = rng.normal_matrix(3, in);
    const Eigen::MatrixXd eps = rng.normal_matrix(3, k);
    const double beta = 0.5 + rng.uniform();

    MlpVae grads = zeros_like(net);
    loss_and_grad(net, batch, beta, eps, &grads);
    const auto net_l = layer_list(net);
    const auto grad_l = layer_list(grads);
    for (std::size_t li = 0; li < net_l.size(); ++li) {
      const auto probe = [&](double& x, double gan) {
        const double x0 = x;
        const double h = 1e-5 * std::max(1.0, std::abs(x0));
        x = x0 + h;
        const double up = loss_and_grad(net, batch, beta, eps, nullptr);
        x = x0 - h;
        const double dn = loss_and_grad(net, batch, beta, eps, nullptr);
        x = x0;
        const double fd = (up - dn) / (2 * h);
        worst = std::max(worst,
                         std::abs(fd - gan) / std::max(1.0, std::abs(gan)));
      };
      for (Eigen::Index i = 0; i < net_l[li]->w.size(); ++i)
        probe(net_l[li]->w.data()[i], grad_l[li]->w.data()[i]);
      for (Eigen::Index i = 0; i < net_l[li]->b.size(); ++i)
        probe(net_l[li]->b.data()[i], grad_l[li]->b.data()[i]);
    }
  }
  return {worst <= 1e-5, "max_relerr=" + fmt_short(worst) + " tol=1e-5"};
}

CheckOutcome check_closed_vs_mc(std::uint64_t seed) {
  double worst_z = 0.0;
  for (int t = 0; t < 3; ++t) {
    Rng rng(derive_seed(seed, "check-mc", static_cast<std::uint64_t>(t)));
    const int n = 2 + static_cast<int>(rng.below(2));
    const int k = 1 + static_cast<int>(rng.below(2));
    const MixingModel m(rng.normal_matrix(n, k));
    LinearVaeParams p = random_params(rng, n, k, 0.4, true);
    const double beta = 0.4 + 2.1 * rng.uniform();

    const MetricBundle closed = metric_bundle(p, m, beta);
    const McBundle mc = mc_oracle_bundle(
        p, m, beta, 20000, 8, derive_seed(seed, "check-mc-draws",
                                          static_cast<std::uint64_t>(t)));
    const auto z = [&](double c, double est, double se) {
      return std::abs(c - est) / std::max(se, 1e-12);
    };
    worst_z = std::max({worst_z,
                        z(closed.loss_value, mc.estimate.loss_value,
                          mc.standard_error.loss_value),
                        z(closed.elbo, mc.estimate.elbo, mc.standard_error.elbo),
                        z(closed.mie, mc.estimate.mie, mc.standard_error.mie),
                        z(closed.tie, mc.estimate.tie, mc.standard_error.tie),
                        z(closed.recon, mc.estimate.recon,
                          mc.standard_error.recon),
                        z(closed.ci_loss, mc.estimate.ci_loss,
                          mc.standard_error.ci_loss)});
  }
  return {worst_z <= 3.0, "max_z=" + fmt_short(worst_z) + " tol=3"};
}

CheckOutcome check_scalar_optimum(std::uint64_t seed) {
  Eigen::MatrixXd a(1, 1);
  a(0, 0) = 1.0;
  const MixingModel m(a);
  SolverConfig cfg;
  cfg.seed = seed;
  const StationaryPoint sp = solve_stationary(m, 1.0, cfg);
  const MetricBundle mb = metric_bundle(sp.params, m, 1.0);

  const double d_err = std::abs(std::abs(sp.params.dec_w(0, 0)) - 1.0);
  const double w_err = std::abs(std::abs(sp.params.enc_mean_w(0, 0)) - 0.5);
  const double b_err =
      std::abs(sp.params.enc_logvar_b(0) + std::log(2.0));
  const bool pass = sp.converged && d_err <= 1e-6 && w_err <= 1e-6 &&
                    b_err <= 1e-6 && std::abs(mb.mie) <= 1e-8 &&
                    std::abs(mb.tie) <= 1e-8;
  return {pass, "d_err=" + fmt_short(d_err) + " w_err=" + fmt_short(w_err) +
                    " b_err=" + fmt_short(b_err) +
                    " mie=" + fmt_short(mb.mie) + " tie=" + fmt_short(mb.tie)};
}

CheckOutcome check_propositions(std::uint64_t seed) {
  Eigen::MatrixXd a(4, 2);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 2; ++c) a(r, c) = 0.5 + (r == c ? 0.5 : 0.0);
  const MixingModel m(a);
  SolverConfig cfg;
  cfg.restarts = 4;
  cfg.seed = seed;
  const auto recs = run_sweep(m, log_grid(0.5, 2.0, 17), cfg);
  const PropositionReport rep = make_report(recs);

  double loss_scale = 1.0, ci_scale = 1.0;
  for (const auto& r : recs) {
    loss_scale = std::max(loss_scale, std::abs(r.bundle.loss_value));
    ci_scale = std::max(ci_scale, std::abs(r.bundle.ci_loss));
  }
  bool pass = rep.converged_count == rep.total_count &&
              rep.prop1_max_violation <= 1e-6 * loss_scale &&
              rep.prop1_envelope_max_relerr <= 0.05 &&
              rep.prop2_max_violation <= 1e-6 * ci_scale &&
              std::abs(std::log(rep.prop3_argmax_beta)) < 0.2;

  // The detectors must also fire on planted violations.
  auto planted = recs;
  planted[8].bundle.ci_loss = planted[7].bundle.ci_loss + 0.1;
  const bool catches_ci = check_proposition2(planted).ci_violation > 0.05;
  planted = recs;
  planted[8].bundle.loss_value = planted[7].bundle.loss_value + 0.1;
  const bool catches_loss = check_proposition1(planted).first > 0.05;
  pass = pass && catches_ci && catches_loss;

  return {pass, "violation=" + fmt_short(rep.prop1_max_violation) +
                    " envelope=" + fmt_short(rep.prop1_envelope_max_relerr) +
                    " argmax_beta=" + fmt_short(rep.prop3_argmax_beta) +
                    " planted_detected=" +
                    (catches_ci && catches_loss ? "yes" : "no")};
}

CheckOutcome check_determinism(std::uint64_t seed) {
  Eigen::MatrixXd a(2, 1);
  a << 1.0, 0.5;
  const MixingModel m(a);
  SolverConfig cfg;
  cfg.restarts = 3;
  cfg.seed = seed;
  const auto grid = log_grid(0.5, 2.0, 5);

  const auto dir = std::filesystem::temp_directory_path();
  const auto fa = dir / ("bvae-check-a-" + std::to_string(seed) + ".csv");
  const auto fb = dir / ("bvae-check-b-" + std::to_string(seed) + ".csv");
  export_csv(run_sweep(m, grid, cfg), fa);
  export_csv(run_sweep(m, grid, cfg), fb);

  const auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  const bool same = slurp(fa) == slurp(fb);
  std::filesystem::remove(fa);
  std::filesystem::remove(fb);

  Rng r1(derive_seed(seed, "check-det")), r2(derive_seed(seed, "check-det"));
  bool stream_same = true;
  for (int i = 0; i < 100; ++i)
    stream_same = stream_same && r1.normal() == r2.normal();

  return {same && stream_same,
          std::string("sweep_bytes=") + (same ? "equal" : "DIFFER") +
              " rng_stream=" + (stream_same ? "equal" : "DIFFER")};
}

}  // namespace

int cmd_check(const CommandArgs& a) {
  const std::vector<
      std::pair<std::string, std::function<CheckOutcome(std::uint64_t)>>>
      registry = {
          {"matrix-identities", check_matrix_identities},
          {"posterior-mc", check_posterior_mc},
          {"linear-gradients", check_linear_gradients},
          {"deep-gradients", check_deep_gradients},
          {"closed-vs-mc", check_closed_vs_mc},
          {"scalar-optimum", check_scalar_optimum},
          {"propositions", check_propositions},
          {"determinism", check_determinism},
      };

  std::uint64_t lo = 0, hi = 0;
  if (!a.seed_spec.empty()) {
    try {
      const auto dots = a.seed_spec.find("..");
      if (dots == std::string::npos) {
        lo = hi = parse_uint(a.seed_spec);
      } else {
        lo = parse_uint(a.seed_spec.substr(0, dots));
        hi = parse_uint(a.seed_spec.substr(dots + 2));
      }
    } catch (const std::invalid_argument&) {
      throw UsageError("check: bad seed spec '" + a.seed_spec + "'");
    }
    if (hi < lo || hi - lo > 1000)
      throw UsageError("check: seed range must be ascending, span <= 1000");
  }

  std::vector<std::size_t> selected;
  for (std::size_t i = 0; i < registry.size(); ++i)
    if (a.only.empty() || registry[i].first.find(a.only) != std::string::npos)
      selected.push_back(i);
  if (selected.empty())
    throw UsageError("check: no check matches '" + a.only + "'");

  bool all_pass = true;
  for (std::uint64_t seed = lo;; ++seed) {
    for (const std::size_t i : selected) {
      CheckOutcome oc;
      try {
        oc = registry[i].second(seed);
      } catch (const std::exception& e) {
        oc = {false, std::string("threw: ") + e.what()};
      }
      all_pass &= oc.pass;
      std::printf("%-18s seed=%llu %s %s\n", registry[i].first.c_str(),
                  static_cast<unsigned long long>(seed),
                  oc.pass ? "PASS" : "FAIL", oc.detail.c_str());
    }
    if (seed == hi) break;
  }
  std::printf("overall %s\n", all_pass ? "PASS" : "FAIL");
  return all_pass ? 0 : 1;
}

}  // namespace disent::cli
