#include <cstdlib>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "commands.hpp"
#include "run_config.hpp"

namespace disent::cli {

std::string default_out_dir() {
  if (const char* env = std::getenv("DISENTANGLE_OUT"); env && *env)
    return env;
  return "out";
}

namespace {

// Every value flag maps onto a configuration key, so the echoed
// config.resolved reproduces any flag combination.
void add_kv(CLI::App* sub, const std::string& flag, std::string key,
            std::vector<std::pair<std::string, std::string>>* sink,
            const std::string& help) {
  sub->add_option_function<std::string>(
      flag,
      [sink, key = std::move(key)](const std::string& v) {
        sink->push_back({key, v});
      },
      help);
}

void add_common(CLI::App* sub, CommandArgs* args) {
  sub->add_option("--config", args->config_path,
                  "flat key = value configuration file");
  add_kv(sub, "--out", "out", &args->overrides,
         "output directory (default $DISENTANGLE_OUT or ./out)");
  add_kv(sub, "--seed", "seed", &args->overrides, "master seed");
}

}  // namespace
}  // namespace disent::cli

int main(int argc, char** argv) {
  using namespace disent::cli;

  CLI::App app{"linear-Gaussian beta-VAE laboratory"};
  app.require_subcommand(1);
  int rc = 0;

  CommandArgs sweep_args;
  CLI::App* sweep = app.add_subcommand(
      "sweep", "solve the linear model across a beta grid, check the "
               "monotonicity and envelope properties, plot the curves");
  add_common(sweep, &sweep_args);
  sweep->add_option("--preset", sweep_args.preset,
                    "named configuration (paper-fig3)");
  sweep->add_option("--jobs", sweep_args.jobs, "max concurrent cells");
  add_kv(sweep, "--n", "n", &sweep_args.overrides, "data dimension");
  add_kv(sweep, "--k", "k", &sweep_args.overrides, "latent dimension");
  sweep->add_option_function<std::string>(
      "--a",
      [&](const std::string& v) {
        sweep_args.overrides.push_back({"mix_diag", v});
        sweep_args.overrides.push_back({"mix_off", v});
      },
      "constant mixing entry (sets mix_diag = mix_off)");
  add_kv(sweep, "--mix-diag", "mix_diag", &sweep_args.overrides,
         "mixing diagonal entry");
  add_kv(sweep, "--mix-off", "mix_off", &sweep_args.overrides,
         "mixing off-diagonal entry");
  add_kv(sweep, "--grid", "grid", &sweep_args.overrides,
         "beta grid: comma list or lo:hi:count[:log|:lin]");
  add_kv(sweep, "--mode", "mode", &sweep_args.overrides,
         "solver parameterization: reduced or full");
  add_kv(sweep, "--restarts", "restarts", &sweep_args.overrides,
         "random restarts per grid point");
  add_kv(sweep, "--grad-tol", "grad_tol", &sweep_args.overrides,
         "stationarity tolerance (gradient infinity norm)");
  add_kv(sweep, "--max-iters", "max_iters", &sweep_args.overrides,
         "ascent iteration cap");
  add_kv(sweep, "--init-scale", "init_scale", &sweep_args.overrides,
         "restart initialization scale");
  sweep->callback([&] { rc = cmd_sweep(sweep_args); });

  CommandArgs deep_args;
  CLI::App* deep = app.add_subcommand(
      "train-deep", "train MLP VAEs on the localization dataset across "
                    "betas and realizations");
  add_common(deep, &deep_args);
  deep->add_option("--preset", deep_args.preset, "named configuration (desk)");
  deep->add_option("--jobs", deep_args.jobs, "max concurrent training cells");
  add_kv(deep, "--betas", "betas", &deep_args.overrides, "comma list of betas");
  add_kv(deep, "--realizations", "realizations", &deep_args.overrides,
         "training repetitions per beta");
  add_kv(deep, "--epochs", "epochs", &deep_args.overrides, "training epochs");
  add_kv(deep, "--lr", "lr", &deep_args.overrides, "Adam learning rate");
  add_kv(deep, "--batch-size", "batch_size", &deep_args.overrides,
         "minibatch size");
  add_kv(deep, "--latent", "latent", &deep_args.overrides,
         "latent dimension (1..4)");
  add_kv(deep, "--hidden", "hidden", &deep_args.overrides,
         "comma list of encoder hidden widths");
  add_kv(deep, "--dataset", "dataset", &deep_args.overrides,
         "directory with dataset.csv + images.bin");
  add_kv(deep, "--dataset-n", "dataset_n", &deep_args.overrides,
         "examples to generate when no dataset is given");
  add_kv(deep, "--mc-samples-eval", "mc_samples_eval", &deep_args.overrides,
         "latent draws per example for the reconstruction estimate");
  deep->add_flag_callback(
      "--no-generate",
      [&] { deep_args.overrides.push_back({"no_generate", "true"}); },
      "fail instead of generating a missing dataset");
  deep->callback([&] { rc = cmd_train_deep(deep_args); });

  CommandArgs gen_args;
  CLI::App* gen = app.add_subcommand(
      "gen-data", "write the localization canvas dataset");
  add_common(gen, &gen_args);
  add_kv(gen, "--n", "n", &gen_args.overrides, "number of examples");
  add_kv(gen, "--digits", "digits", &gen_args.overrides,
         "IDX image file to draw digits from (default: bundled glyphs)");
  gen->callback([&] { rc = cmd_gen_data(gen_args); });

  CommandArgs check_args;
  CLI::App* check = app.add_subcommand(
      "check", "run the self-validation suite (closed forms vs Monte Carlo, "
               "gradients, identities, detectors)");
  check->add_option("--only", check_args.only,
                    "run only checks whose name contains this substring");
  check->add_option("--seed", check_args.seed_spec,
                    "seed or inclusive seed range a..b");
  check->callback([&] { rc = cmd_check(check_args); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return rc;
}
