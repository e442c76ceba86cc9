#pragma once

#include <string>
#include <utility>
#include <vector>

namespace disent::cli {

// Everything a subcommand needs from the argv layer. `overrides` holds the
// key = value pairs implied by flags the user actually passed.
struct CommandArgs {
  std::string config_path;
  std::string preset;
  std::vector<std::pair<std::string, std::string>> overrides;
  int jobs = 1;
  std::string only;       // check: substring filter on check names
  std::string seed_spec;  // check: "a" or "a..b"
};

int cmd_sweep(const CommandArgs& a);
int cmd_train_deep(const CommandArgs& a);
int cmd_gen_data(const CommandArgs& a);
int cmd_check(const CommandArgs& a);

// --out flag, else DISENTANGLE_OUT, else ./out.
std::string default_out_dir();

}  // namespace disent::cli
