#pragma once

// Command implementations behind the `warpada` CLI. Each returns the process
// exit code: 0 success, 1 check failure, 2 usage/config/input error.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

#include "warpada/adversarial.hpp"
#include "warpada/config.hpp"
#include "warpada/data.hpp"
#include "warpada/gradcheck.hpp"
#include "warpada/model.hpp"
#include "warpada/signal.hpp"
#include "warpada/training.hpp"
#include "warpada/warp.hpp"

namespace warpada {

inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitUsage = 2;

struct GradcheckRow {
  std::string name;
  double max_rel_error = 0.0;
};

namespace detail {

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

/// Entries in [-1, 1] at least `gap` away from zero and from each other.
inline Tensor separated_tensor(Shape shape, Rng& rng, double gap = 1e-3) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) {
    double v;
    bool ok;
    do {
      v = rng.uniform(-1.0, 1.0);
      ok = std::fabs(v) > gap;
      for (std::size_t j = 0; j < i && ok; ++j) ok = std::fabs(v - t[j]) > gap;
    } while (!ok);
    t[i] = v;
  }
  return t;
}

inline constexpr double kKinkMargin = 1e-3;

/// Redraws until the forward pass stays kKinkMargin away from every kink, so
/// the central difference never straddles one.
template <class Make>
Tensor smooth_point(const ScalarGraph& f, Make& make_input, std::size_t max_tries = 10000) {
  auto& tracking = testing_hooks::track_kinks();
  for (std::size_t attempt = 0; attempt < max_tries; ++attempt) {
    Tensor x = make_input();
    testing_hooks::kink_margin() = std::numeric_limits<double>::infinity();
    tracking = true;
    try {
      evaluate_scalar(f, x);
    } catch (...) {
      tracking = false;
      throw;
    }
    tracking = false;
    if (testing_hooks::kink_margin() >= kKinkMargin) return x;
  }
  throw Error("gradcheck: no input away from kinks after " + std::to_string(max_tries) + " draws");
}

}  // namespace detail

/// Central-difference checks over every tensor op, the path construction
/// chain and the end-to-end adversarial losses, `points` random points each.
inline std::vector<GradcheckRow> run_gradchecks(std::size_t points = 20, std::uint64_t seed = 0, double h = 1e-5) {
  Rng rng(derive_seed(seed, 0x67726164ULL));
  std::vector<GradcheckRow> rows;
  auto check = [&](const std::string& name, auto make_input, const ScalarGraph& f) {
    double worst = 0.0;
    for (std::size_t p = 0; p < points; ++p) {
      worst = std::max(worst, finite_diff_check(f, detail::smooth_point(f, make_input), h));
    }
    rows.push_back({name, worst});
  };
  // phi_0 only shifts the accumulated curve, which the boundary rescale
  // removes, so its derivative is identically zero. A relative error there
  // would just measure roundoff; that coordinate is compared absolutely.
  auto check_phi = [&](const std::string& name, auto make_input, const ScalarGraph& f) {
    double worst = 0.0;
    for (std::size_t p = 0; p < points; ++p) {
      const Tensor x = detail::smooth_point(f, make_input);
      std::vector<std::size_t> live(x.size() - 1);
      std::iota(live.begin(), live.end(), std::size_t{1});
      worst = std::max(worst, finite_diff_check(f, x, h, live));
      Tensor up = x, down = x;
      up[0] += h;
      down[0] -= h;
      const double numeric = (evaluate_scalar(f, up) - evaluate_scalar(f, down)) / (2.0 * h);
      worst = std::max(worst, std::fabs(analytic_gradient(f, x)[0] - numeric));
    }
    rows.push_back({name, worst});
  };
  auto vec = [&](std::size_t n) { return [&rng, n] { return detail::random_tensor({n}, rng); }; };
  auto sep = [&](std::size_t n) { return [&rng, n] { return detail::separated_tensor({n}, rng); }; };
  // Fixed random weights let each scalar depend nonlinearly on every input entry.
  const Tensor w6 = detail::random_tensor({6}, rng);
  auto weighted = [w6](Tape& t, Var y) { return sum(y * t.constant(w6.reshaped(y.shape()))); };

  check("add", vec(6), [&](Tape& t, Var x) { return weighted(t, add(x * x, x)); });
  check("sub", vec(6), [&](Tape& t, Var x) { return weighted(t, sub(x * x, sin(x))); });
  check("mul", vec(6), [&](Tape& t, Var x) { return weighted(t, mul(x, cos(x))); });
  check("div", vec(6), [&](Tape& t, Var x) { return weighted(t, div(x, exp(x) + 1.0)); });
  check("relu", sep(6), [&](Tape& t, Var x) { return weighted(t, relu(x)); });
  check("cos", vec(6), [&](Tape& t, Var x) { return weighted(t, cos(x * 3.0)); });
  check("sin", vec(6), [&](Tape& t, Var x) { return weighted(t, sin(x * 3.0)); });
  check("exp", vec(6), [&](Tape& t, Var x) { return weighted(t, exp(x)); });
  check("log", vec(6), [&](Tape& t, Var x) { return weighted(t, log(x * x + 0.5)); });
  check("abs", sep(6), [&](Tape& t, Var x) { return weighted(t, abs(x)); });
  check("sum", vec(6), [&](Tape&, Var x) { return sum(x * x); });
  check("mean", vec(6), [&](Tape&, Var x) { return mean(x * x * x); });
  check("min_reduce", sep(7), [&](Tape&, Var x) { return min_reduce(x * x * x); });
  check("max_reduce", sep(7), [&](Tape&, Var x) { return max_reduce(x * x * x); });
  check("cumsum", vec(7), [&](Tape& t, Var x) {
    const Tensor w = Tensor::vector({0.3, -1.2, 0.8, 0.1, 2.0, -0.7, 0.5});
    return sum(cumsum(x * x) * t.constant(w));
  });
  {
    const Tensor b = detail::random_tensor({5, 3}, rng);
    check("matmul", [&] { return detail::random_tensor({4, 5}, rng); },
          [&](Tape& t, Var a) { return sum(sin(matmul(a, t.constant(b)))); });
    const Tensor a = detail::random_tensor({4, 5}, rng);
    check("matmul_rhs", [&] { return detail::random_tensor({5, 3}, rng); },
          [&](Tape& t, Var bb) { return sum(sin(matmul(t.constant(a), bb))); });
  }
  {
    const Tensor k = detail::random_tensor({3, 2, 3}, rng);
    check("conv1d", [&] { return detail::random_tensor({2, 16}, rng); },
          [&](Tape& t, Var x) { return sum(sin(conv1d(x, t.constant(k), 1, 1))); });
    const Tensor x = detail::random_tensor({2, 16}, rng);
    check("conv1d_kernel", [&] { return detail::random_tensor({3, 2, 3}, rng); },
          [&](Tape& t, Var kk) { return sum(sin(conv1d(t.constant(x), kk, 2, 1))); });
  }
  {
    const Tensor w = detail::random_tensor({8}, rng);
    auto probe = [w](Tape& t, Var y) { return sum(sin(y) * t.constant(w)); };
    check("h1_monotone", sep(8), [&](Tape& t, Var phi) { return probe(t, h1_monotone(phi)); });
    check("h2_boundary", [&] {
      Tensor c = detail::random_tensor({8}, rng, 0.05, 1.0);
      double acc = 0.0;
      for (double& v : c.data()) v = (acc += v);
      return c;
    }, [&](Tape& t, Var cum) { return probe(t, h2_boundary(cum) * 0.2); });
    check("h3_clip", sep(8), [&](Tape& t, Var d) { return probe(t, h3_clip(d * 4.0, 1.5)); });
    check_phi("make_path", sep(8), [&](Tape& t, Var phi) { return probe(t, make_path(phi, 2.0, 3)); });
  }

  // End to end on a small classifier input.
  const std::size_t n = 48, m = 6;
  const Classifier model(1, n, 3, derive_seed(seed, 1));
  Tensor series = Tensor::zeros({1, n});
  for (std::size_t i = 0; i < n; ++i)
    series[i] = std::sin(2.0 * std::numbers::pi * 3.0 * static_cast<double>(i) / n) + 0.1 * rng.uniform(-1.0, 1.0);
  const Tensor z_ref = model.predict(series).first;
  AdvConfig cfg;
  cfg.gamma = 1.0;
  cfg.me_beta = 0.1;
  auto objective = [&](Tape& t, Var x_hat) {
    return detail::adversarial_objective(model, model.bind(t, false), x_hat, t.constant(z_ref), 1, cfg).value;
  };
  Tensor smooth_phi = Tensor::zeros({n});
  for (std::size_t i = 0; i < n; ++i) smooth_phi[i] = std::sin(0.3 * static_cast<double>(i));
  const Tensor fixed_path = [&] {
    Tape tmp;
    return make_path(tmp.constant(smooth_phi), 4.0, m).value();
  }();
  auto random_phi = [&] { return detail::random_tensor({n}, rng); };
  check("warp_apply_x", [&] { return detail::random_tensor({1, n}, rng); },
        [&](Tape& t, Var x) { return sum(sin(warp_apply(x, t.constant(fixed_path), m))); });
  check("warp_apply_path", [&] { return detail::random_tensor({n}, rng, -(m - 1.0), m - 1.0); },
        [&](Tape& t, Var path) { return sum(sin(warp_apply(t.constant(series), path, m))); });
  check_phi("pipeline_phi", random_phi,
        [&](Tape& t, Var phi) { return objective(t, warp_apply(t.constant(series), make_path(phi, 4.0, m), m)); });
  check("pipeline_x", [&] { return detail::random_tensor({1, n}, rng); },
        [&](Tape& t, Var x) { return objective(t, warp_apply(x, make_path(t.constant(smooth_phi), 4.0, m), m)); });
  check("pipeline_amp", [&] { return detail::random_tensor({1, n}, rng, -0.1, 0.1); },
        [&](Tape& t, Var a) { return objective(t, t.constant(series) + a); });
  return rows;
}

inline int cmd_gradcheck(std::ostream& out, std::size_t points = 20, std::uint64_t seed = 0,
                         double threshold = 1e-4) {
  const auto rows = run_gradchecks(points, seed);
  bool ok = true;
  out << std::left << std::setw(18) << "check" << std::setw(14) << "max_rel_err" << "status\n";
  for (const auto& r : rows) {
    const bool pass = r.max_rel_error < threshold;
    ok = ok && pass;
    out << std::setw(18) << r.name << std::setw(14) << std::setprecision(3) << std::scientific << r.max_rel_error
        << std::defaultfloat << (pass ? "ok" : "FAIL") << '\n';
  }
  out << rows.size() << " checks, threshold " << threshold << ": " << (ok ? "all passed" : "FAILED") << '\n';
  return ok ? kExitOk : kExitCheckFailed;
}

inline int cmd_synth(const RunConfig& cfg, std::ostream& out) {
  const fs::path dir = cfg.out_dir;
  fs::create_directories(dir);
  const SynthSpec spec = cfg.synth_spec();
  const auto bench = synth_generate(spec);
  out << "wrote " << save_dataset(bench.source, dir, "source").string() << '\n';
  for (std::size_t t = 0; t < bench.targets.size(); ++t) {
    out << "wrote " << save_dataset(bench.targets[t], dir, spec.targets[t].name).string() << '\n';
  }
  write_config_echo(cfg, dir / "config_echo.txt");
  return kExitOk;
}

inline Classifier load_model_or_throw(const std::string& path) {
  if (!fs::exists(path)) throw ConfigError("checkpoint not found: " + path);
  return load_checkpoint(path);
}

inline int cmd_augment(const RunConfig& cfg, const std::string& checkpoint, const std::string& manifest,
                       std::ostream& out) {
  const AdvConfig adv = cfg.resolved_adv();
  if (adv.mode == Mode::erm) throw ConfigError("augment needs mode ada, tada or tada_plus");
  adv.validate();
  const Classifier model = load_model_or_throw(checkpoint);
  const Dataset data = load_manifest(manifest);
  const auto samples = generate_all(model, data.samples, adv, cfg.train.jobs);

  const fs::path dir = cfg.out_dir;
  fs::create_directories(dir);
  Dataset augmented;
  augmented.classes = data.classes;
  augmented.label_names = data.label_names;
  std::ofstream log(dir / "augment_log.csv");
  log << "origin_id,mode,objective";
  for (std::size_t i = 0; i < data.length(); ++i) log << ",d" << i;
  log << '\n' << std::setprecision(17);
  for (const auto& s : samples) {
    augmented.samples.push_back(s.series);
    log << s.origin_id << ',' << to_string(s.mode) << ',' << s.objective;
    for (double d : s.path) log << ',' << d;
    log << '\n';
  }
  out << "wrote " << save_dataset(augmented, dir, "augmented").string() << " (" << augmented.size() << " samples)\n";
  write_config_echo(cfg, dir / "config_echo.txt");
  return kExitOk;
}

struct TrainOutcome {
  Classifier model;
  TrainReport report;
  std::size_t train_size = 0;
};

/// Trains on cfg.train_manifest, or on the synthetic source domain when no
/// manifest is given (then the synthetic targets are evaluated too).
inline TrainOutcome train_from_config(const RunConfig& cfg) {
  const AdvConfig adv = cfg.resolved_adv();
  adv.validate();

  Dataset train;
  std::vector<Dataset> eval_sets;
  if (cfg.train_manifest.empty()) {
    auto bench = synth_generate(cfg.synth_spec());
    train = std::move(bench.source);
    eval_sets = std::move(bench.targets);
  } else {
    train = load_manifest(cfg.train_manifest);
  }
  for (const auto& m : cfg.eval_manifests) eval_sets.push_back(load_manifest(m));

  const Classifier init(train.channels(), train.length(), train.classes, derive_seed(adv.seed, 0x6d6f64656cULL));
  auto [model, report] = run(train, adv, init, cfg.train);
  report.config = cfg.echo();
  if (!eval_sets.empty()) {
    const auto ev = evaluate(model, eval_sets);
    report.domains = ev.domains;
    report.average_f1 = ev.average;
  }
  return {std::move(model), std::move(report), train.size()};
}

inline int cmd_train(const RunConfig& cfg, std::ostream& out) {
  const auto [model, report, train_size] = train_from_config(cfg);
  const fs::path dir = cfg.out_dir;
  fs::create_directories(dir);
  save_checkpoint(model, (dir / "model.ckpt").string());
  write_report(report, dir / "report.txt");
  write_config_echo(cfg, dir / "config_echo.txt");
  out << "trained " << to_string(cfg.adv.mode) << " on " << train_size << " samples; final dataset "
      << report.dataset_sizes.back() << " samples\n";
  for (const auto& d : report.domains) out << d.domain << '\t' << d.macro_f1 << '\n';
  if (!report.domains.empty()) out << "average\t" << report.average_f1 << '\n';
  out << "wrote " << (dir / "model.ckpt").string() << " and " << (dir / "report.txt").string() << '\n';
  return kExitOk;
}

inline int cmd_eval(const RunConfig& cfg, const std::string& checkpoint, const std::vector<std::string>& manifests,
                    std::ostream& out) {
  if (manifests.empty()) throw ConfigError("eval needs at least one manifest");
  const Classifier model = load_model_or_throw(checkpoint);
  std::vector<Dataset> domains;
  for (const auto& m : manifests) domains.push_back(load_manifest(m));
  const auto ev = evaluate(model, domains);
  const fs::path dir = cfg.out_dir;
  fs::create_directories(dir);
  std::ofstream table(dir / "eval.txt");
  table << std::setprecision(17) << "domain\tmacro_f1\n";
  out << "domain\tmacro_f1\n";
  for (const auto& d : ev.domains) {
    table << d.domain << '\t' << d.macro_f1 << '\n';
    out << d.domain << '\t' << d.macro_f1 << '\n';
  }
  table << "average\t" << ev.average << '\n';
  out << "average\t" << ev.average << '\n';
  write_embeddings(model, domains, dir / "embeddings.csv");
  write_config_echo(cfg, dir / "config_echo.txt");
  return kExitOk;
}

inline int cmd_export_features(const RunConfig& cfg, const std::string& checkpoint,
                               const std::vector<std::string>& manifests, std::ostream& out) {
  if (manifests.empty()) throw ConfigError("export-features needs at least one manifest");
  const Classifier model = load_model_or_throw(checkpoint);
  std::vector<Dataset> domains;
  for (const auto& m : manifests) domains.push_back(load_manifest(m));
  const fs::path dir = cfg.out_dir;
  fs::create_directories(dir);
  write_embeddings(model, domains, dir / "embeddings.csv");
  write_config_echo(cfg, dir / "config_echo.txt");
  out << "wrote " << (dir / "embeddings.csv").string() << '\n';
  return kExitOk;
}

}  // namespace warpada
