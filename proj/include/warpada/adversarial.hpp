#pragma once

// Maximization phase: per-sample gradient ascent on
//
//   J = CE(f(x_hat), y) + me_beta * H(f(x_hat)) - gamma * |z(x_hat) - z(x)|^2
//
// where x_hat = x + a (amplitude / ADA), warp(x, path(phi)) (temporal / TADA),
// or warp(x + a, path(phi)) (composed TADA+).

#include <cmath>
#include <cstdint>
#include <string>
#include <thread>
#include <vector>

#include "warpada/model.hpp"
#include "warpada/random.hpp"
#include "warpada/signal.hpp"
#include "warpada/warp.hpp"

namespace warpada {

enum class Mode { erm, ada, tada, tada_plus };
enum class Combine { union_sets, composed };

inline std::string to_string(Mode m) {
  switch (m) {
    case Mode::erm: return "erm";
    case Mode::ada: return "ada";
    case Mode::tada: return "tada";
    case Mode::tada_plus: return "tada_plus";
  }
  return "?";
}

inline Mode parse_mode(const std::string& s) {
  if (s == "erm") return Mode::erm;
  if (s == "ada") return Mode::ada;
  if (s == "tada") return Mode::tada;
  if (s == "tada_plus" || s == "tada+") return Mode::tada_plus;
  throw Error("unknown mode '" + s + "' (expected erm, ada, tada or tada_plus)");
}

inline std::string to_string(Combine c) { return c == Combine::union_sets ? "union" : "composed"; }

inline Combine parse_combine(const std::string& s) {
  if (s == "union") return Combine::union_sets;
  if (s == "composed") return Combine::composed;
  throw Error("unknown combine rule '" + s + "' (expected union or composed)");
}

struct AdvConfig {
  double gamma = 1.0;
  double eta = 1.0;        // step on the warp parameters
  double eta_amp = 1.0;    // step on the additive perturbation
  std::size_t t_max = 10;
  std::size_t t_min = 10;
  std::size_t k_rounds = 2;
  std::size_t t_final = 10;
  std::size_t m_window = 10;
  double phi_max = 8.0;
  Mode mode = Mode::tada;
  Combine combine = Combine::union_sets;
  double me_beta = 0.0;
  double phi_init = 0.01;  // phi starts Uniform(-phi_init, phi_init)
  std::uint64_t seed = 0;

  void validate() const {
    auto bad = [](const std::string& what) { throw Error("invalid config: " + what); };
    if (!(gamma > 0.0)) bad("gamma must be > 0");
    if (!(eta >= 0.0) || !(eta_amp >= 0.0)) bad("eta and eta_amp must be >= 0");
    if (t_max < 1 || t_min < 1 || t_final < 1) bad("t_max, t_min, t_final must be >= 1");
    if (mode != Mode::erm && k_rounds < 1) bad("k_rounds must be >= 1");
    if (phi_max > static_cast<double>(m_window) - 1.0) bad("phi_max must be <= m_window - 1");
    if (!(phi_max > 0.0)) bad("phi_max must be > 0");
    if (!(me_beta >= 0.0)) bad("me_beta must be >= 0");
    if (!(phi_init >= 0.0)) bad("phi_init must be >= 0");
  }
};

struct AdvSample {
  TimeSeries series;
  std::size_t origin_id = 0;
  Mode mode = Mode::tada;
  double objective = 0.0;
  std::vector<double> path;  // applied displacements; all zero for amplitude samples
};

namespace detail {

struct Objective {
  Var value;
  Var logits;
};

inline Objective adversarial_objective(const Classifier& model, const BoundWeights& w, Var x_hat, Var z_ref,
                                       int label, const AdvConfig& cfg) {
  const auto out = model.forward(w, x_hat);
  Var j = loss_ce(out.logits, label) - cfg.gamma * semantic_distance(out.features, z_ref);
  if (cfg.me_beta > 0.0) j = j + cfg.me_beta * entropy(out.logits);
  return {j, out.logits};
}

inline void require_finite(double value, std::size_t iteration, std::size_t origin) {
  if (!std::isfinite(value)) {
    throw Error("adversarial objective became non-finite at iteration " + std::to_string(iteration) + " for sample " +
                std::to_string(origin));
  }
}

inline Tensor ascend(const Tensor& p, const Tensor& g, double step) {
  Tensor out = p;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += step * g[i];
  return out;
}

/// Joint ascent over an optional additive perturbation and optional warp
/// parameters. t_max gradient steps, then the sample at the final parameters.
inline AdvSample maximize(const Classifier& model, const TimeSeries& x, std::size_t origin, const AdvConfig& cfg,
                          bool use_amp, bool use_warp, Mode tag) {
  const std::size_t n = x.length();
  const Tensor z_ref = model.predict(x.values).first;

  Tensor amp = Tensor::zeros(x.values.shape());
  Tensor phi = Tensor::zeros({n});
  if (use_warp) {
    Rng rng(derive_seed(cfg.seed, origin));
    for (double& v : phi.data()) v = rng.uniform(-cfg.phi_init, cfg.phi_init);
  }

  struct Pass {
    double objective;
    Tensor amp_grad, phi_grad, sample, path;
  };
  auto evaluate = [&](bool need_grad, std::size_t iteration) {
    Tape tape;
    const auto w = model.bind(tape, false);
    Var xin = tape.constant(x.values);
    Var a = tape.leaf(amp, use_amp && need_grad);
    Var ph = tape.leaf(phi, use_warp && need_grad);
    Var x_hat = use_amp ? xin + a : xin;
    Var path;
    if (use_warp) {
      path = make_path(ph, cfg.phi_max, cfg.m_window);
      x_hat = warp_apply(x_hat, path, cfg.m_window);
    }
    const auto obj = adversarial_objective(model, w, x_hat, tape.constant(z_ref), x.label, cfg);
    Pass pass{obj.value.item(), {}, {}, x_hat.value(), use_warp ? path.value() : Tensor::zeros({n})};
    require_finite(pass.objective, iteration, origin);
    if (need_grad) {
      tape.backward(obj.value);
      if (use_amp) pass.amp_grad = tape.grad(a);
      if (use_warp) pass.phi_grad = tape.grad(ph);
    }
    return pass;
  };

  for (std::size_t it = 0; it < cfg.t_max; ++it) {
    const Pass pass = evaluate(true, it);
    if (use_amp) amp = ascend(amp, pass.amp_grad, cfg.eta_amp);
    if (use_warp) phi = ascend(phi, pass.phi_grad, cfg.eta);
  }
  const Pass last = evaluate(false, cfg.t_max);
  AdvSample out;
  out.series = TimeSeries{last.sample, x.label, x.domain_tag};
  out.origin_id = origin;
  out.mode = tag;
  out.objective = last.objective;
  out.path = last.path.values();
  return out;
}

}  // namespace detail

/// Additive perturbation starting from zero.
inline AdvSample ada_maximize(const Classifier& model, const TimeSeries& x, const AdvConfig& cfg,
                              std::size_t origin_id = 0) {
  return detail::maximize(model, x, origin_id, cfg, true, false, Mode::ada);
}

/// Warp perturbation; phi starts at small seeded uniform noise.
inline AdvSample tada_maximize(const Classifier& model, const TimeSeries& x, const AdvConfig& cfg,
                               std::size_t origin_id = 0) {
  return detail::maximize(model, x, origin_id, cfg, false, true, Mode::tada);
}

/// Union: one amplitude and one warp sample. Composed: one sample from joint
/// ascent of both perturbations.
inline std::vector<AdvSample> tadaplus_generate(const Classifier& model, const TimeSeries& x, const AdvConfig& cfg,
                                                std::size_t origin_id = 0) {
  if (cfg.mode != Mode::tada_plus) throw Error("tadaplus_generate requires mode tada_plus");
  if (cfg.combine == Combine::composed) {
    return {detail::maximize(model, x, origin_id, cfg, true, true, Mode::tada_plus)};
  }
  return {ada_maximize(model, x, cfg, origin_id), tada_maximize(model, x, cfg, origin_id)};
}

/// Adversarial samples for one source sample under cfg.mode.
inline std::vector<AdvSample> generate(const Classifier& model, const TimeSeries& x, const AdvConfig& cfg,
                                       std::size_t origin_id) {
  switch (cfg.mode) {
    case Mode::ada: return {ada_maximize(model, x, cfg, origin_id)};
    case Mode::tada: return {tada_maximize(model, x, cfg, origin_id)};
    case Mode::tada_plus: return tadaplus_generate(model, x, cfg, origin_id);
    case Mode::erm: break;
  }
  throw Error("mode erm does not generate adversarial samples");
}

/// Samples per source sample and round.
inline std::size_t growth_factor(const AdvConfig& cfg) {
  if (cfg.mode == Mode::erm) return 0;
  return cfg.mode == Mode::tada_plus && cfg.combine == Combine::union_sets ? 2 : 1;
}

/// Runs `generate` for every sample, fanned out over `jobs` threads against
/// the same frozen weights. Output is in origin order and independent of jobs.
inline std::vector<AdvSample> generate_all(const Classifier& model, const std::vector<TimeSeries>& xs,
                                           const AdvConfig& cfg, std::size_t jobs = 1) {
  std::vector<std::vector<AdvSample>> per(xs.size());
  jobs = std::max<std::size_t>(1, std::min(jobs, xs.size()));
  if (jobs == 1) {
    for (std::size_t i = 0; i < xs.size(); ++i) per[i] = generate(model, xs[i], cfg, i);
  } else {
    std::vector<std::exception_ptr> errors(jobs);
    {
      std::vector<std::jthread> workers;
      for (std::size_t j = 0; j < jobs; ++j) {
        workers.emplace_back([&, j] {
          try {
            for (std::size_t i = j; i < xs.size(); i += jobs) per[i] = generate(model, xs[i], cfg, i);
          } catch (...) {
            errors[j] = std::current_exception();
          }
        });
      }
    }
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  std::vector<AdvSample> out;
  for (auto& v : per)
    for (auto& s : v) out.push_back(std::move(s));
  return out;
}

}  // namespace warpada
