#include "disentangle/sweep.hpp"

#include <cmath>
#include <fstream>

#include "disentangle/rng.hpp"
#include "disentangle/textio.hpp"

namespace disent {

namespace {

void check_grid(const std::vector<double>& grid) {
  if (grid.empty()) throw std::invalid_argument("sweep: empty beta grid");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0)) throw std::invalid_argument("sweep: betas must be positive");
    if (i > 0 && !(grid[i] > grid[i - 1]))
      throw std::invalid_argument("sweep: betas must be strictly increasing");
  }
}

std::vector<const SweepRecord*> converged_subset(
    const std::vector<SweepRecord>& recs, std::size_t minimum,
    const char* who) {
  std::vector<const SweepRecord*> out;
  for (const auto& r : recs)
    if (r.converged) out.push_back(&r);
  if (out.size() < minimum)
    throw std::invalid_argument(std::string(who) + ": too few converged records");
  return out;
}

std::vector<SweepRecord> sweep_impl(const MixingModel& m,
                                    const std::vector<double>& grid,
                                    const SolverConfig& cfg) {
  check_grid(grid);
  Eigen::MatrixXd sigma = data_covariance(m);

  std::vector<SweepRecord> recs;
  recs.reserve(grid.size());
  LinearVaeParams warm;
  bool have_warm = false;

  for (std::size_t i = 0; i < grid.size(); ++i) {
    SolverConfig point_cfg = cfg;
    point_cfg.seed = derive_seed(cfg.seed, "sweep-point", i);
    StationaryPoint sp =
        solve_stationary_cov(sigma, m.source_dim(), grid[i], point_cfg,
                             have_warm ? &warm : nullptr);
    SweepRecord rec;
    rec.beta = grid[i];
    rec.bundle = metric_bundle(sp.params, m, grid[i]);
    rec.residual = sp.residual;
    rec.converged = sp.converged;
    rec.seed = point_cfg.seed;
    recs.push_back(rec);
    if (sp.converged) {
      warm = sp.params;
      have_warm = true;
    }
  }

  std::size_t failed = 0;
  for (const auto& r : recs)
    if (!r.converged) ++failed;
  if (failed * 10 > recs.size())
    throw SweepError("sweep: " + std::to_string(failed) + " of " +
                     std::to_string(recs.size()) + " points failed to converge");
  return recs;
}

}  // namespace

std::vector<double> log_grid(double lo, double hi, int count) {
  if (!(lo > 0) || !(hi > lo) || count < 2)
    throw std::invalid_argument("log_grid: need 0 < lo < hi and count >= 2");
  std::vector<double> g(count);
  const double llo = std::log10(lo);
  const double lhi = std::log10(hi);
  for (int i = 0; i < count; ++i)
    g[i] = std::pow(10.0, llo + (lhi - llo) * i / (count - 1));
  g.front() = lo;
  g.back() = hi;
  return g;
}

std::vector<SweepRecord> run_sweep(const MixingModel& m,
                                   const std::vector<double>& grid,
                                   const SolverConfig& cfg) {
  return sweep_impl(m, grid, cfg);
}

std::vector<SweepRecord> fixed_decoder_sweep(const MixingModel& m,
                                             const Eigen::MatrixXd& d_fixed,
                                             const std::vector<double>& grid,
                                             const SolverConfig& cfg) {
  SolverConfig fixed_cfg = cfg;
  fixed_cfg.mode = SolverMode::fixed_decoder;
  fixed_cfg.fixed_decoder = d_fixed;
  return sweep_impl(m, grid, fixed_cfg);
}

std::pair<double, double> check_proposition1(
    const std::vector<SweepRecord>& recs) {
  auto conv = converged_subset(recs, 3, "check_proposition1");

  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < conv.size(); ++i)
    worst = std::max(worst,
                     conv[i + 1]->bundle.loss_value - conv[i]->bundle.loss_value);

  double envelope = 0.0;
  for (std::size_t i = 1; i + 1 < conv.size(); ++i) {
    double slope = (conv[i + 1]->bundle.loss_value -
                    conv[i - 1]->bundle.loss_value) /
                   (conv[i + 1]->beta - conv[i - 1]->beta);
    double ci = conv[i]->bundle.ci_loss;
    envelope = std::max(envelope,
                        std::abs(slope + ci) / std::max(std::abs(ci), 1e-12));
  }
  return {worst, envelope};
}

Prop2Result check_proposition2(const std::vector<SweepRecord>& recs) {
  auto conv = converged_subset(recs, 2, "check_proposition2");
  Prop2Result out{-std::numeric_limits<double>::infinity(),
                  -std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i + 1 < conv.size(); ++i) {
    out.ci_violation = std::max(
        out.ci_violation, conv[i + 1]->bundle.ci_loss - conv[i]->bundle.ci_loss);
    out.recon_violation = std::max(
        out.recon_violation, conv[i + 1]->bundle.recon - conv[i]->bundle.recon);
  }
  return out;
}

Prop3Result check_proposition3(const std::vector<SweepRecord>& recs) {
  auto conv = converged_subset(recs, 3, "check_proposition3");
  if (!(conv.front()->beta <= 1.0 && conv.back()->beta >= 1.0))
    throw std::invalid_argument("check_proposition3: grid must span beta = 1");

  std::size_t arg_elbo = 0, arg_mie = 0;
  for (std::size_t i = 1; i < conv.size(); ++i) {
    if (conv[i]->bundle.elbo > conv[arg_elbo]->bundle.elbo) arg_elbo = i;
    if (conv[i]->bundle.mie < conv[arg_mie]->bundle.mie) arg_mie = i;
  }
  Prop3Result out;
  out.elbo_argmax_beta = conv[arg_elbo]->beta;
  out.mie_argmin_beta = conv[arg_mie]->beta;
  out.mie_is_interior = arg_mie > 0 && arg_mie + 1 < conv.size();
  return out;
}

PropositionReport make_report(const std::vector<SweepRecord>& recs) {
  PropositionReport rep;
  rep.total_count = static_cast<int>(recs.size());
  for (const auto& r : recs)
    if (r.converged) ++rep.converged_count;
  auto [worst, envelope] = check_proposition1(recs);
  rep.prop1_max_violation = worst;
  rep.prop1_envelope_max_relerr = envelope;
  Prop2Result p2 = check_proposition2(recs);
  rep.prop2_max_violation = std::max(p2.ci_violation, p2.recon_violation);
  Prop3Result p3 = check_proposition3(recs);
  rep.prop3_argmax_beta = p3.elbo_argmax_beta;
  rep.mie_argmin_beta = p3.mie_argmin_beta;
  rep.mie_is_interior = p3.mie_is_interior;
  return rep;
}

void export_csv(const std::vector<SweepRecord>& recs,
                const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("export_csv: cannot open " + path.string());
  out << "beta,loss,elbo,mie,tie,recon,ci_loss,residual,converged,seed\n";
  for (const auto& r : recs) {
    out << fmt_g17(r.beta) << ',' << fmt_g17(r.bundle.loss_value) << ','
        << fmt_g17(r.bundle.elbo) << ',' << fmt_g17(r.bundle.mie) << ','
        << fmt_g17(r.bundle.tie) << ',' << fmt_g17(r.bundle.recon) << ','
        << fmt_g17(r.bundle.ci_loss) << ',' << fmt_g17(r.residual) << ','
        << (r.converged ? "true" : "false") << ',' << r.seed << '\n';
  }
  if (!out) throw std::runtime_error("export_csv: write failed for " + path.string());
}

std::vector<SweepRecord> import_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("import_csv: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("import_csv: empty file " + path.string());
  if (trim(line) != "beta,loss,elbo,mie,tie,recon,ci_loss,residual,converged,seed")
    throw std::runtime_error("import_csv: unexpected header in " + path.string());

  std::vector<SweepRecord> recs;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto f = split(trim(line), ',');
    if (f.size() != 10)
      throw std::runtime_error("import_csv: malformed row in " + path.string());
    SweepRecord r;
    try {
      r.beta = parse_double(f[0]);
      r.bundle.loss_value = parse_double(f[1]);
      r.bundle.elbo = parse_double(f[2]);
      r.bundle.mie = parse_double(f[3]);
      r.bundle.tie = parse_double(f[4]);
      r.bundle.recon = parse_double(f[5]);
      r.bundle.ci_loss = parse_double(f[6]);
      r.residual = parse_double(f[7]);
      r.seed = parse_uint(f[9]);
    } catch (const std::invalid_argument& e) {
      // a broken file is a file error, not a usage error
      throw std::runtime_error("import_csv: bad value in " + path.string() +
                               " (" + e.what() + ")");
    }
    if (f[8] == "true")
      r.converged = true;
    else if (f[8] == "false")
      r.converged = false;
    else
      throw std::runtime_error("import_csv: bad converged flag in " + path.string());
    recs.push_back(r);
  }
  return recs;
}

}  // namespace disent
