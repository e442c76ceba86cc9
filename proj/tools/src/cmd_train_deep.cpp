#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "commands.hpp"
#include "disentangle/data_io.hpp"
#include "disentangle/mlp_vae.hpp"
#include "disentangle/plot.hpp"
#include "disentangle/rng.hpp"
#include "disentangle/textio.hpp"
#include "run_config.hpp"

namespace disent::cli {

namespace {

std::string fmt_short(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

Eigen::MatrixXd tile_40x40(const Eigen::MatrixXd& images, Eigen::Index row) {
  Eigen::MatrixXd t(40, 40);
  for (int r = 0; r < 40; ++r)
    for (int c = 0; c < 40; ++c) t(r, c) = images(row, r * 40 + c);
  return t;
}

struct Cell {
  int bi = 0;
  int r = 0;
  double beta = 0.0;
};

void metric_plot(const std::vector<double>& betas,
                 const std::vector<std::vector<std::optional<double>>>& per_run,
                 const std::string& name, Rgb color,
                 const std::filesystem::path& path) {
  LinePlot p;
  p.title = "deep " + name + " vs beta";
  p.x_label = "beta (log scale)";
  p.y_label = name;
  p.log_x = true;
  p.vlines = {1.0};

  const std::size_t realizations =
      per_run.empty() ? 0 : per_run.front().size();
  const Rgb faint{185, 185, 185};
  for (std::size_t r = 0; r < realizations; ++r) {
    Series s;
    s.color = faint;
    for (std::size_t bi = 0; bi < betas.size(); ++bi)
      if (per_run[bi][r]) {
        s.x.push_back(betas[bi]);
        s.y.push_back(*per_run[bi][r]);
      }
    if (!s.x.empty()) p.series.push_back(std::move(s));
  }
  Series mean;
  mean.label = "mean " + name;
  mean.color = color;
  for (std::size_t bi = 0; bi < betas.size(); ++bi) {
    double sum = 0.0;
    int cnt = 0;
    for (const auto& v : per_run[bi])
      if (v) {
        sum += *v;
        ++cnt;
      }
    if (cnt > 0) {
      mean.x.push_back(betas[bi]);
      mean.y.push_back(sum / cnt);
    }
  }
  p.series.push_back(std::move(mean));
  write_line_plot(p, path);
}

}  // namespace

int cmd_train_deep(const CommandArgs& a) {
  RunConfig rc({
      {"adam_beta1", "0.9"},
      {"adam_beta2", "0.999"},
      {"adam_eps", "1e-8"},
      {"batch_size", "100"},
      {"betas", "0.3,1,3"},
      {"dataset", ""},
      {"dataset_n", "1000"},
      {"epochs", "200"},
      {"hidden", "256,200,200"},
      {"latent", "2"},
      {"lr", "0.001"},
      {"mc_samples_eval", "1000"},
      {"no_generate", "false"},
      {"out", default_out_dir()},
      {"realizations", "5"},
      {"seed", "0"},
  });
  // The desk protocol is the default schema; the preset names it.
  if (!a.preset.empty() && a.preset != "desk")
    throw UsageError("train-deep: unknown preset '" + a.preset + "'");
  if (!a.config_path.empty()) rc.load_file(a.config_path);
  for (const auto& [k, v] : a.overrides) rc.set(k, v);

  const std::vector<double> betas = rc.get_double_list("betas");
  if (betas.empty()) throw UsageError("train-deep: empty beta list");
  for (double b : betas)
    if (!(b > 0)) throw UsageError("train-deep: betas must be positive");
  const int realizations = static_cast<int>(rc.get_int("realizations"));
  const int epochs = static_cast<int>(rc.get_int("epochs"));
  const int latent = static_cast<int>(rc.get_int("latent"));
  const std::vector<int> hidden = rc.get_int_list("hidden");
  if (realizations < 1 || epochs < 1)
    throw UsageError("train-deep: need realizations >= 1 and epochs >= 1");
  if (latent < 1 || latent > 4)
    throw UsageError(
        "train-deep: latent must be 1..4 (the inference-error gauge search "
        "enumerates signed permutations)");
  for (int h : hidden)
    if (h < 1) throw UsageError("train-deep: hidden sizes must be positive");
  const std::uint64_t seed = rc.get_seed("seed");

  // Dataset: an explicit directory wins; otherwise generate in memory from
  // the bundled digit set with the master seed (matching gen-data).
  CanvasDataset ds;
  const std::string ds_path{trim(rc.raw("dataset"))};
  if (!ds_path.empty()) {
    try {
      ds = load_canvas_dataset(ds_path);
    } catch (const std::exception& e) {
      throw UsageError(std::string("train-deep: ") + e.what());
    }
  } else if (rc.get_bool("no_generate")) {
    throw UsageError(
        "train-deep: no dataset directory given and generation is disabled");
  } else {
    const int dn = static_cast<int>(rc.get_int("dataset_n"));
    ds = make_localization_dataset(synthetic_digits(), dn, seed);
  }

  const Standardized std_data = standardize(ds.images);
  const int input_dim = static_cast<int>(std_data.data.cols());

  const std::filesystem::path out{rc.raw("out")};
  std::error_code ec;
  std::filesystem::create_directories(out / "models", ec);
  if (ec)
    throw UsageError("cannot create output directory " + out.string() + ": " +
                     ec.message());
  rc.write_resolved(out);

  std::vector<Cell> cells;
  for (int bi = 0; bi < static_cast<int>(betas.size()); ++bi)
    for (int r = 0; r < realizations; ++r)
      cells.push_back({bi, r, betas[static_cast<std::size_t>(bi)]});

  const auto model_path = [&](const Cell& c) {
    return out / "models" /
           ("beta" + fmt_short(c.beta) + "_r" + std::to_string(c.r) + ".bvae");
  };

  TrainConfig base;
  base.epochs = epochs;
  base.lr = rc.get_double("lr");
  base.adam_beta1 = rc.get_double("adam_beta1");
  base.adam_beta2 = rc.get_double("adam_beta2");
  base.adam_eps = rc.get_double("adam_eps");
  base.batch_size = static_cast<int>(rc.get_int("batch_size"));
  base.mc_samples_eval = static_cast<int>(rc.get_int("mc_samples_eval"));
  if (base.batch_size < 1 || base.mc_samples_eval < 1)
    throw UsageError("train-deep: batch_size and mc_samples_eval must be >= 1");

  std::vector<std::optional<DeepSweepRecord>> results(cells.size());
  std::vector<std::string> failures(cells.size());
  std::atomic<std::size_t> next{0};
  std::mutex io_mutex;

  const auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      const Cell& c = cells[i];
      try {
        TrainConfig tc = base;
        tc.beta = c.beta;
        tc.seed = derive_seed(seed, "deep-cell",
                              static_cast<std::uint64_t>(c.bi),
                              static_cast<std::uint64_t>(c.r));
        MlpVae net = MlpVae::build(
            input_dim, latent, hidden,
            derive_seed(seed, "deep-init", static_cast<std::uint64_t>(c.bi),
                        static_cast<std::uint64_t>(c.r)));
        TrainResult res = train(std::move(net), std_data.data, tc);
        save_model(res.net, model_path(c));
        const DeepSweepRecord rec =
            evaluate(res.net, ds.mixing, std_data.data, ds.positions, tc, c.r);
        results[i] = rec;
        std::lock_guard<std::mutex> lock(io_mutex);
        std::cout << "cell beta=" << fmt_short(c.beta) << " r=" << c.r
                  << " elbo=" << fmt_short(rec.elbo)
                  << " recon=" << fmt_short(rec.recon)
                  << " ci_loss=" << fmt_short(rec.ci_loss)
                  << " tie=" << fmt_short(rec.tie) << '\n';
      } catch (const std::exception& e) {
        failures[i] = "cell beta=" + fmt_short(c.beta) + " r=" +
                      std::to_string(c.r) + ": " + e.what();
      }
    }
  };

  const int jobs = std::clamp(a.jobs, 1, static_cast<int>(cells.size()));
  {
    std::vector<std::thread> pool;
    for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
  }

  bool failed = false;
  for (const auto& f : failures)
    if (!f.empty()) {
      failed = true;
      std::cerr << "error: " << f << '\n';
    }

  // Rows in (beta, realization) order regardless of scheduling.
  {
    std::ofstream csv(out / "deep.csv", std::ios::binary | std::ios::trunc);
    if (!csv) throw UsageError("cannot write " + (out / "deep.csv").string());
    csv << "beta,realization,elbo,tie,recon,ci_loss\n";
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (!results[i]) continue;
      const auto& r = *results[i];
      csv << fmt_g17(r.beta) << ',' << r.realization << ',' << fmt_g17(r.elbo)
          << ',' << fmt_g17(r.tie) << ',' << fmt_g17(r.recon) << ','
          << fmt_g17(r.ci_loss) << '\n';
    }
  }

  std::vector<std::vector<std::optional<double>>> elbo(betas.size()),
      tie(betas.size()), recon(betas.size()), ci(betas.size());
  for (std::size_t bi = 0; bi < betas.size(); ++bi) {
    elbo[bi].resize(static_cast<std::size_t>(realizations));
    tie[bi].resize(static_cast<std::size_t>(realizations));
    recon[bi].resize(static_cast<std::size_t>(realizations));
    ci[bi].resize(static_cast<std::size_t>(realizations));
  }
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!results[i]) continue;
    const auto bi = static_cast<std::size_t>(cells[i].bi);
    const auto r = static_cast<std::size_t>(cells[i].r);
    elbo[bi][r] = results[i]->elbo;
    tie[bi][r] = results[i]->tie;
    recon[bi][r] = results[i]->recon;
    ci[bi][r] = results[i]->ci_loss;
  }
  const Rgb blue{31, 119, 180}, orange{255, 127, 14}, green{44, 160, 44},
      red{214, 39, 40};
  metric_plot(betas, elbo, "elbo", blue, out / "deep_elbo.png");
  metric_plot(betas, tie, "tie", red, out / "deep_tie.png");
  metric_plot(betas, recon, "recon", orange, out / "deep_recon.png");
  metric_plot(betas, ci, "ci_loss", green, out / "deep_ci_loss.png");

  for (std::size_t bi = 0; bi < betas.size(); ++bi) {
    double se = 0, st = 0, sr = 0, sc = 0;
    int cnt = 0;
    for (std::size_t r = 0; r < static_cast<std::size_t>(realizations); ++r)
      if (elbo[bi][r]) {
        se += *elbo[bi][r];
        st += *tie[bi][r];
        sr += *recon[bi][r];
        sc += *ci[bi][r];
        ++cnt;
      }
    if (cnt)
      std::cout << "beta=" << fmt_short(betas[bi]) << " mean elbo="
                << fmt_short(se / cnt) << " recon=" << fmt_short(sr / cnt)
                << " ci_loss=" << fmt_short(sc / cnt)
                << " tie=" << fmt_short(st / cnt) << " (" << cnt << " runs)\n";
  }

  // Qualitative sheet: inputs above their deterministic reconstructions
  // (decoder mean at the encoder mean) for the beta nearest 1.
  {
    std::size_t bi_one = 0;
    for (std::size_t bi = 1; bi < betas.size(); ++bi)
      if (std::abs(std::log(betas[bi])) < std::abs(std::log(betas[bi_one])))
        bi_one = bi;
    const Cell show{static_cast<int>(bi_one), 0, betas[bi_one]};
    const std::size_t cell_idx = bi_one * static_cast<std::size_t>(realizations);
    if (results[cell_idx]) {
      const MlpVae net = load_model(model_path(show));
      const int nshow =
          static_cast<int>(std::min<Eigen::Index>(8, std_data.data.rows()));
      const Eigen::MatrixXd x = std_data.data.topRows(nshow);
      const auto [mu, lv] = encode_batch(net, x);
      (void)lv;
      const Eigen::MatrixXd xhat = decode_batch(net, mu);

      const int scale = 3, tile = 40 * scale, gap = 8;
      Canvas cv(gap + nshow * (tile + gap), 26 + 2 * tile + 2 * gap);
      double lo = x.minCoeff(), hi = x.maxCoeff();
      lo = std::min(lo, xhat.minCoeff());
      hi = std::max(hi, xhat.maxCoeff());
      cv.text(gap, 8,
              "top: input, bottom: reconstruction (beta=" +
                  fmt_short(show.beta) + ")",
              Rgb{0, 0, 0});
      for (int i = 0; i < nshow; ++i) {
        cv.blit_gray(tile_40x40(x, i), gap + i * (tile + gap), 26, scale, lo,
                     hi);
        cv.blit_gray(tile_40x40(xhat, i), gap + i * (tile + gap),
                     26 + tile + gap, scale, lo, hi);
      }
      save_png(cv, out / "reconstructions.png");
    }
  }

  std::cout << "wrote " << (out / "deep.csv").string() << '\n';
  return failed ? 1 : 0;
}

}  // namespace disent::cli
