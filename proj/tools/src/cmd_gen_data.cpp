#include <filesystem>
#include <iostream>

#include "commands.hpp"
#include "disentangle/data_io.hpp"
#include "disentangle/textio.hpp"
#include "run_config.hpp"

namespace disent::cli {

int cmd_gen_data(const CommandArgs& a) {
  RunConfig rc({
      {"digits", ""},
      {"n", "1000"},
      {"out", default_out_dir()},
      {"seed", "0"},
  });
  if (!a.preset.empty())
    throw UsageError("gen-data: unknown preset '" + a.preset + "'");
  if (!a.config_path.empty()) rc.load_file(a.config_path);
  for (const auto& [k, v] : a.overrides) rc.set(k, v);

  const int n = static_cast<int>(rc.get_int("n"));
  if (n < 1) throw UsageError("gen-data: n must be >= 1");
  const std::uint64_t seed = rc.get_seed("seed");

  IdxImages digits;
  const std::string digits_path{trim(rc.raw("digits"))};
  if (digits_path.empty()) {
    digits = synthetic_digits();
  } else {
    try {
      digits = load_idx_images(digits_path);
    } catch (const std::exception& e) {
      throw UsageError(std::string("gen-data: ") + e.what());
    }
  }

  const CanvasDataset ds = make_localization_dataset(digits, n, seed);

  const std::filesystem::path out{rc.raw("out")};
  std::error_code ec;
  std::filesystem::create_directories(out, ec);
  if (ec)
    throw UsageError("cannot create output directory " + out.string() + ": " +
                     ec.message());
  try {
    rc.write_resolved(out);
    save_canvas_dataset(ds, out);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }

  const auto& mix = ds.mixing.mixing;
  std::cout << "generated " << n << " examples, seed " << seed << ", mixing [["
            << mix(0, 0) << ", " << mix(0, 1) << "], [" << mix(1, 0) << ", "
            << mix(1, 1) << "]] -> " << out.string() << '\n';
  return 0;
}

}  // namespace disent::cli
