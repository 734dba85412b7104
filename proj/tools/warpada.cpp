// warpada command-line entry point. Hyperparameters come from the config
// file; flags cover paths, seed, mode and worker count.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "warpada/commands.hpp"

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string mode;
  std::string out;
  std::optional<std::size_t> jobs;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("-c,--config", c.config, "key = value config file");
  app->add_option("--seed", c.seed, "override the config seed");
  app->add_option("--mode", c.mode, "erm, ada, tada or tada_plus");
  app->add_option("-o,--out", c.out, "output directory");
  app->add_option("-j,--jobs", c.jobs, "worker threads for the maximization phase");
}

// Precedence: config file < WARPADA_SEED < flags.
warpada::RunConfig resolve(const Common& c) {
  warpada::RunConfig cfg = warpada::load_config(c.config);
  if (c.seed) cfg.set("seed", std::to_string(*c.seed));
  if (!c.mode.empty()) cfg.set("mode", c.mode);
  if (!c.out.empty()) cfg.out_dir = c.out;
  if (c.jobs) cfg.train.jobs = *c.jobs;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"warpada: time-warp adversarial augmentation for time series"};
  app.require_subcommand(1);

  Common common;
  std::string checkpoint, manifest;
  std::vector<std::string> manifests;
  std::size_t points = 20;
  bool inject_fault = false;

  auto* synth = app.add_subcommand("synth", "write the synthetic benchmark as CSV manifests");
  add_common(synth, common);

  auto* grad = app.add_subcommand("gradcheck", "compare analytic and finite-difference gradients");
  add_common(grad, common);
  grad->add_option("--points", points, "random points per check");
  grad->add_flag("--inject-fault", inject_fault, "corrupt the cos backward pass (self-test)")->group("");

  auto* augment = app.add_subcommand("augment", "run one maximization phase against a checkpoint");
  add_common(augment, common);
  augment->add_option("--checkpoint", checkpoint)->required();
  augment->add_option("--manifest", manifest)->required();

  auto* train = app.add_subcommand("train", "run the full training loop");
  add_common(train, common);

  auto* eval = app.add_subcommand("eval", "per-domain macro-F1 and embeddings");
  add_common(eval, common);
  eval->add_option("--checkpoint", checkpoint)->required();
  eval->add_option("manifests", manifests, "domain manifests")->required();

  auto* features = app.add_subcommand("export-features", "write pooled features for each sample");
  add_common(features, common);
  features->add_option("--checkpoint", checkpoint)->required();
  features->add_option("manifests", manifests, "domain manifests")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? warpada::kExitOk : warpada::kExitUsage;
  }

  try {
    const warpada::RunConfig cfg = resolve(common);
    if (*synth) return warpada::cmd_synth(cfg, std::cout);
    if (*grad) {
      warpada::testing_hooks::flip_cos_backward() = inject_fault;
      std::filesystem::create_directories(cfg.out_dir);
      warpada::write_config_echo(cfg, std::filesystem::path(cfg.out_dir) / "config_echo.txt");
      return warpada::cmd_gradcheck(std::cout, points, cfg.adv.seed);
    }
    if (*augment) return warpada::cmd_augment(cfg, checkpoint, manifest, std::cout);
    if (*train) return warpada::cmd_train(cfg, std::cout);
    if (*eval) return warpada::cmd_eval(cfg, checkpoint, manifests, std::cout);
    if (*features) return warpada::cmd_export_features(cfg, checkpoint, manifests, std::cout);
  } catch (const warpada::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return warpada::kExitUsage;
  } catch (const warpada::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return warpada::kExitUsage;
  }
  return warpada::kExitUsage;
}
