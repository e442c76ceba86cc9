#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "disentangle/linear_vae.hpp"
#include "disentangle/metrics.hpp"

namespace disent {

struct SweepError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One solved point of a beta sweep.
struct SweepRecord {
  double beta = 0.0;
  MetricBundle bundle;
  double residual = 0.0;
  bool converged = false;
  std::uint64_t seed = 0;
};

struct Prop2Result {
  double ci_violation = 0.0;     // worst forward difference of ci_loss
  double recon_violation = 0.0;  // worst forward difference of recon
};

struct Prop3Result {
  double elbo_argmax_beta = 0.0;
  double mie_argmin_beta = 0.0;
  bool mie_is_interior = false;
};

struct PropositionReport {
  double prop1_max_violation = 0.0;
  double prop1_envelope_max_relerr = 0.0;
  double prop2_max_violation = 0.0;
  double prop3_argmax_beta = 0.0;
  double mie_argmin_beta = 0.0;
  bool mie_is_interior = false;
  int converged_count = 0;
  int total_count = 0;
};

// count logarithmically spaced points from lo to hi inclusive.
std::vector<double> log_grid(double lo, double hi, int count);

// Solves the stationary problem at every grid point in ascending order,
// warm-starting each solve from the previous converged solution on top of
// the configured random restarts. Throws SweepError when more than 10% of
// the points fail to converge.
std::vector<SweepRecord> run_sweep(const MixingModel& m,
                                   const std::vector<double>& grid,
                                   const SolverConfig& cfg);

// Same protocol with the decoder pinned to d_fixed at every grid point.
std::vector<SweepRecord> fixed_decoder_sweep(const MixingModel& m,
                                             const Eigen::MatrixXd& d_fixed,
                                             const std::vector<double>& grid,
                                             const SolverConfig& cfg);

// Worst signed forward difference of the optimal loss (should be <= 0) and
// the worst relative error of the central-difference envelope check
// d loss*/d beta = -ci_loss at interior points. Converged records only.
std::pair<double, double> check_proposition1(const std::vector<SweepRecord>& recs);

// Worst signed forward differences of ci_loss and recon (should be <= 0).
Prop2Result check_proposition2(const std::vector<SweepRecord>& recs);

// ELBO argmax and MIE argmin over the converged records; requires the grid
// to span beta = 1.
Prop3Result check_proposition3(const std::vector<SweepRecord>& recs);

PropositionReport make_report(const std::vector<SweepRecord>& recs);

// sweep.csv schema:
// beta,loss,elbo,mie,tie,recon,ci_loss,residual,converged,seed
// with floats at 17 significant digits and LF line endings.
void export_csv(const std::vector<SweepRecord>& recs,
                const std::filesystem::path& path);
std::vector<SweepRecord> import_csv(const std::filesystem::path& path);

}  // namespace disent
