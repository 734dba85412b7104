#pragma once

// Alternating minimization / maximization over K rounds, then T epochs on
// the expanded dataset, and macro-F1 evaluation per domain.

#include <chrono>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "warpada/adversarial.hpp"
#include "warpada/data.hpp"
#include "warpada/model.hpp"
#include "warpada/random.hpp"

namespace warpada {

struct TrainOptions {
  double lr = 0.05;
  std::size_t batch = 32;
  std::size_t jobs = 1;
};

struct DomainScore {
  std::string domain;
  double macro_f1 = 0.0;
};

struct TrainReport {
  std::vector<double> round_losses;     // mean minibatch loss of each minimization phase, then the final phase
  std::vector<std::size_t> dataset_sizes;  // |D_0|, |D_1|, ..., |D_K|
  std::vector<DomainScore> domains;
  double average_f1 = 0.0;
  double wall_seconds = 0.0;
  std::vector<std::pair<std::string, std::string>> config;
  std::uint64_t seed = 0;

  /// Everything except wall-clock time.
  bool same_metrics(const TrainReport& o) const {
    if (domains.size() != o.domains.size()) return false;
    for (std::size_t i = 0; i < domains.size(); ++i)
      if (domains[i].domain != o.domains[i].domain || domains[i].macro_f1 != o.domains[i].macro_f1) return false;
    return round_losses == o.round_losses && dataset_sizes == o.dataset_sizes && average_f1 == o.average_f1 &&
           config == o.config && seed == o.seed;
  }
};

/// One SGD step on the mean cross-entropy of `batch`; returns that loss.
inline double sgd_step(Classifier& model, const Dataset& d, std::span<const std::size_t> batch, double lr) {
  Tape tape;
  const auto w = model.bind(tape, true);
  Var total = tape.constant(Tensor(0.0));
  for (std::size_t idx : batch) {
    const TimeSeries& s = d.samples[idx];
    total = total + loss_ce(model.forward(w, tape.constant(s.values)).logits, s.label);
  }
  Var loss = total * (1.0 / static_cast<double>(batch.size()));
  tape.backward(loss);
  for (std::size_t p = 0; p < w.params.size(); ++p) {
    const Tensor g = tape.grad(w.params[p]);
    auto data = model.params()[p].data();
    for (std::size_t i = 0; i < data.size(); ++i) data[i] -= lr * g[i];
  }
  return loss.item();
}

/// `steps` SGD updates on minibatches drawn uniformly with replacement.
/// Returns the mean minibatch loss (0 when steps == 0).
inline double minimize_phase(Classifier& model, const Dataset& d, std::size_t steps, double lr, std::size_t batch,
                             Rng& rng) {
  if (d.empty()) throw Error("minimize_phase: empty dataset");
  if (batch == 0) throw Error("minimize_phase: batch must be positive");
  double total = 0.0;
  std::vector<std::size_t> picks(batch);
  for (std::size_t t = 0; t < steps; ++t) {
    for (auto& p : picks) p = static_cast<std::size_t>(rng.below(d.size()));
    total += sgd_step(model, d, picks, lr);
  }
  return steps ? total / static_cast<double>(steps) : 0.0;
}

/// `epochs` passes over a fresh uniform permutation of d. Returns the mean minibatch loss.
inline double train_epochs(Classifier& model, const Dataset& d, std::size_t epochs, double lr, std::size_t batch,
                           Rng& rng) {
  if (d.empty()) throw Error("train_epochs: empty dataset");
  if (batch == 0) throw Error("train_epochs: batch must be positive");
  std::vector<std::size_t> order(d.size());
  double total = 0.0;
  std::size_t steps = 0;
  for (std::size_t e = 0; e < epochs; ++e) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t len = std::min(batch, order.size() - start);
      total += sgd_step(model, d, std::span<const std::size_t>(order).subspan(start, len), lr);
      ++steps;
    }
  }
  return steps ? total / static_cast<double>(steps) : 0.0;
}

/// Adversarial samples for every element of the original dataset.
inline std::vector<AdvSample> maximize_phase(const Classifier& model, const Dataset& d0, const AdvConfig& cfg,
                                             std::size_t jobs = 1) {
  return generate_all(model, d0.samples, cfg, jobs);
}

/// Full training procedure. With mode erm the adversarial rounds are skipped.
/// When `expanded` is given it receives the final dataset D_K.
inline std::pair<Classifier, TrainReport> run(const Dataset& d0, const AdvConfig& cfg, Classifier model,
                                              const TrainOptions& opt = {}, Dataset* expanded = nullptr) {
  const auto start = std::chrono::steady_clock::now();
  if (d0.empty()) throw Error("run: empty dataset");
  d0.validate();
  cfg.validate();
  TrainReport report;
  report.seed = cfg.seed;
  Rng rng(derive_seed(cfg.seed, 0x7261696eULL));

  Dataset current = d0;
  report.dataset_sizes.push_back(current.size());
  const std::size_t rounds = cfg.mode == Mode::erm ? 0 : cfg.k_rounds;
  for (std::size_t k = 1; k <= rounds; ++k) {
    report.round_losses.push_back(minimize_phase(model, current, cfg.t_min, opt.lr, opt.batch, rng));
    AdvConfig round_cfg = cfg;
    round_cfg.seed = derive_seed(cfg.seed, k);
    for (auto& s : maximize_phase(model, d0, round_cfg, opt.jobs)) current.samples.push_back(std::move(s.series));
    report.dataset_sizes.push_back(current.size());
  }
  report.round_losses.push_back(train_epochs(model, current, cfg.t_final, opt.lr, opt.batch, rng));
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (expanded) *expanded = std::move(current);
  return {std::move(model), std::move(report)};
}

// ---------------------------------------------------------------------------
// Evaluation

/// Unweighted mean of per-class F1. Classes absent from both preds and truth
/// are left out of the mean; a class present in only one of them scores 0.
inline double macro_f1(std::span<const int> preds, std::span<const int> truth, std::size_t classes) {
  if (preds.size() != truth.size()) {
    throw Error("macro_f1: " + std::to_string(preds.size()) + " predictions for " + std::to_string(truth.size()) +
                " labels");
  }
  std::vector<std::size_t> tp(classes, 0), pred_count(classes, 0), true_count(classes, 0);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto p = static_cast<std::size_t>(preds[i]), t = static_cast<std::size_t>(truth[i]);
    if (preds[i] < 0 || truth[i] < 0 || p >= classes || t >= classes) throw Error("macro_f1: label out of range");
    ++pred_count[p];
    ++true_count[t];
    if (p == t) ++tp[p];
  }
  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    if (pred_count[c] == 0 && true_count[c] == 0) continue;
    total += 2.0 * static_cast<double>(tp[c]) / static_cast<double>(pred_count[c] + true_count[c]);
    ++counted;
  }
  if (counted == 0) throw Error("macro_f1: no labels");
  return total / static_cast<double>(counted);
}

inline std::vector<int> predict_all(const Classifier& model, const Dataset& d) {
  std::vector<int> out;
  out.reserve(d.size());
  for (const auto& s : d.samples) out.push_back(model.predict_label(s.values));
  return out;
}

struct Evaluation {
  std::vector<DomainScore> domains;
  double average = 0.0;
};

/// Argmax predictions per domain; `names` defaults to each domain's first tag.
inline Evaluation evaluate(const Classifier& model, const std::vector<Dataset>& domains,
                           std::vector<std::string> names = {}) {
  if (domains.empty()) throw Error("evaluate: no domains");
  Evaluation ev;
  for (std::size_t i = 0; i < domains.size(); ++i) {
    const Dataset& d = domains[i];
    if (d.empty()) throw Error("evaluate: domain " + std::to_string(i) + " is empty");
    std::vector<int> truth;
    for (const auto& s : d.samples) truth.push_back(s.label);
    const std::string name = i < names.size() ? names[i] : d.samples.front().domain_tag;
    ev.domains.push_back({name, macro_f1(predict_all(model, d), truth, std::max(d.classes, model.classes()))});
  }
  double total = 0.0;
  for (const auto& s : ev.domains) total += s.macro_f1;
  ev.average = total / static_cast<double>(ev.domains.size());
  return ev;
}

// ---------------------------------------------------------------------------
// Outputs

inline void write_report(const TrainReport& r, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write report " + path.string());
  out << std::setprecision(17);
  out << "# warpada train report v1\n";
  out << "seed = " << r.seed << '\n';
  for (const auto& [k, v] : r.config) out << "config." << k << " = " << v << '\n';
  for (std::size_t i = 0; i < r.dataset_sizes.size(); ++i) out << "dataset_size." << i << " = " << r.dataset_sizes[i] << '\n';
  for (std::size_t i = 0; i < r.round_losses.size(); ++i) out << "loss." << i << " = " << r.round_losses[i] << '\n';
  out << "wall_seconds = " << r.wall_seconds << '\n';
  if (!r.domains.empty()) {
    out << "average_macro_f1 = " << r.average_f1 << '\n';
    out << "\n[domains]\ndomain\tmacro_f1\n";
    for (const auto& d : r.domains) out << d.domain << '\t' << d.macro_f1 << '\n';
  }
}

/// One row per sample: origin_id, domain_tag, label, f0..f63.
inline void write_embeddings(const Classifier& model, const std::vector<Dataset>& domains, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write embeddings " + path.string());
  out << "origin_id,domain_tag,label";
  for (std::size_t f = 0; f < kFeatureDim; ++f) out << ",f" << f;
  out << '\n' << std::setprecision(12);
  for (const auto& d : domains)
    for (std::size_t i = 0; i < d.size(); ++i) {
      const auto& s = d.samples[i];
      const Tensor z = model.predict(s.values).first;
      out << i << ',' << s.domain_tag << ',' << s.label;
      for (double v : z.data()) out << ',' << v;
      out << '\n';
    }
}

}  // namespace warpada
