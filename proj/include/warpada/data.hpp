#pragma once

// Datasets on disk (manifest + per-series CSV) and the synthetic domain-shift
// benchmark.
//
// Manifest format:
//
//   WARPADA-MANIFEST v1
//   channels 1
//   length 128
//   classes 3
//   labels c0 c1 c2
//   series source/s00000.csv source c0
//   ...
//
// Series paths are relative to the manifest's directory. Series CSV files have
// one row per timestep and one column per channel; a non-numeric first row is
// treated as a header.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "warpada/random.hpp"
#include "warpada/signal.hpp"
#include "warpada/warp.hpp"

namespace warpada {

namespace fs = std::filesystem;

struct Dataset {
  std::vector<TimeSeries> samples;
  std::size_t classes = 0;
  std::vector<std::string> label_names;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  std::size_t channels() const { return samples.empty() ? 0 : samples.front().channels(); }
  std::size_t length() const { return samples.empty() ? 0 : samples.front().length(); }

  /// Throws unless every sample shares C and N and every label is in range.
  void validate() const {
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const auto& s = samples[i];
      if (s.values.rank() != 2 || s.channels() != channels() || s.length() != length()) {
        throw Error("sample " + std::to_string(i) + " has shape " + shape_string(s.values.shape()) +
                    ", expected " + shape_string({channels(), length()}));
      }
      if (s.label < 0 || static_cast<std::size_t>(s.label) >= classes) {
        throw Error("sample " + std::to_string(i) + " has label " + std::to_string(s.label) + " outside [0, " +
                    std::to_string(classes) + ")");
      }
    }
  }
};

inline std::vector<std::string> default_label_names(std::size_t classes) {
  std::vector<std::string> names;
  for (std::size_t c = 0; c < classes; ++c) names.push_back("c" + std::to_string(c));
  return names;
}

// ---------------------------------------------------------------------------
// CSV series

inline TimeSeries read_series_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("missing series file " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
        if (used != cell.size()) numeric = false;
      } catch (const std::exception&) {
        numeric = false;
      }
    }
    if (!numeric) {
      if (rows.empty() && lineno == 1) continue;  // header
      throw Error(path.string() + ":" + std::to_string(lineno) + ": non-numeric value");
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw Error(path.string() + ":" + std::to_string(lineno) + ": ragged row with " + std::to_string(row.size()) +
                  " columns, expected " + std::to_string(rows.front().size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(path.string() + ": no data rows");
  const std::size_t length = rows.size(), channels = rows.front().size();
  TimeSeries ts{Tensor::zeros({channels, length}), 0, ""};
  for (std::size_t t = 0; t < length; ++t)
    for (std::size_t c = 0; c < channels; ++c) ts.values[c * length + t] = rows[t][c];
  if (!ts.values.all_finite()) throw Error(path.string() + ": non-finite value");
  return ts;
}

inline void write_series_csv(const TimeSeries& ts, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write series file " + path.string());
  out << std::setprecision(12);
  const std::size_t length = ts.length(), channels = ts.channels();
  for (std::size_t c = 0; c < channels; ++c) out << (c ? "," : "") << "ch" << c;
  out << '\n';
  for (std::size_t t = 0; t < length; ++t) {
    for (std::size_t c = 0; c < channels; ++c) out << (c ? "," : "") << ts.values[c * length + t];
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Manifest

inline constexpr const char* kManifestHeader = "WARPADA-MANIFEST v1";

inline Dataset load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("missing manifest " + path.string());
  const fs::path base = path.parent_path();
  auto fail = [&](std::size_t lineno, const std::string& msg) -> Error {
    return Error(path.string() + ":" + std::to_string(lineno) + ": " + msg);
  };

  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line) || (++lineno, line != kManifestHeader)) {
    throw fail(1, std::string("expected header '") + kManifestHeader + "'");
  }
  std::size_t channels = 0, length = 0, classes = 0;
  std::map<std::string, int> label_ids;
  Dataset data;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    if (key == "channels") {
      ss >> channels;
    } else if (key == "length") {
      ss >> length;
    } else if (key == "classes") {
      ss >> classes;
    } else if (key == "labels") {
      std::string name;
      while (ss >> name) {
        const int id = static_cast<int>(data.label_names.size());
        if (!label_ids.emplace(name, id).second) throw fail(lineno, "duplicate label '" + name + "'");
        data.label_names.push_back(name);
      }
    } else if (key == "series") {
      std::string file, domain, label;
      if (!(ss >> file >> domain >> label)) throw fail(lineno, "series entry needs <path> <domain> <label>");
      auto it = label_ids.find(label);
      if (it == label_ids.end()) throw fail(lineno, "unknown label '" + label + "'");
      TimeSeries ts;
      try {
        ts = read_series_csv(base / file);
      } catch (const Error& e) {
        throw fail(lineno, e.what());
      }
      if (ts.channels() != channels || ts.length() != length) {
        throw fail(lineno, file + " has " + std::to_string(ts.channels()) + " channels x " +
                               std::to_string(ts.length()) + " steps, expected " + std::to_string(channels) + " x " +
                               std::to_string(length));
      }
      ts.label = it->second;
      ts.domain_tag = domain;
      data.samples.push_back(std::move(ts));
    } else {
      throw fail(lineno, "unknown manifest key '" + key + "'");
    }
    if (ss.fail() && key != "labels") throw fail(lineno, "malformed '" + key + "' line");
  }
  if (classes == 0) classes = data.label_names.size();
  if (classes != data.label_names.size()) {
    throw Error(path.string() + ": classes " + std::to_string(classes) + " but " +
                std::to_string(data.label_names.size()) + " labels listed");
  }
  data.classes = classes;
  return data;
}

/// Writes one CSV per sample under dir/<stem>/ and the manifest dir/<stem>.manifest.
inline fs::path save_dataset(const Dataset& data, const fs::path& dir, const std::string& stem) {
  fs::create_directories(dir / stem);
  const auto names = data.label_names.empty() ? default_label_names(data.classes) : data.label_names;
  const fs::path manifest = dir / (stem + ".manifest");
  std::ofstream out(manifest);
  if (!out) throw Error("cannot write manifest " + manifest.string());
  out << kManifestHeader << '\n'
      << "channels " << data.channels() << '\n'
      << "length " << data.length() << '\n'
      << "classes " << data.classes << '\n'
      << "labels";
  for (const auto& n : names) out << ' ' << n;
  out << '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::ostringstream file;
    file << stem << "/s" << std::setw(5) << std::setfill('0') << i << ".csv";
    write_series_csv(data.samples[i], dir / file.str());
    const auto& s = data.samples[i];
    out << "series " << file.str() << ' ' << (s.domain_tag.empty() ? stem : s.domain_tag) << ' '
        << names.at(static_cast<std::size_t>(s.label)) << '\n';
  }
  return manifest;
}

// ---------------------------------------------------------------------------
// Synthetic benchmark

struct Sinusoid {
  double amplitude = 1.0;
  double frequency = 1.0;  // cycles per series
  double phase = 0.0;
};

struct ClassPrototype {
  std::vector<Sinusoid> components;
};

enum class ShiftKind { amplitude, warp, both };

inline std::string to_string(ShiftKind k) {
  switch (k) {
    case ShiftKind::amplitude: return "amplitude";
    case ShiftKind::warp: return "warp";
    case ShiftKind::both: return "both";
  }
  return "?";
}

inline ShiftKind parse_shift_kind(const std::string& s) {
  if (s == "amplitude") return ShiftKind::amplitude;
  if (s == "warp") return ShiftKind::warp;
  if (s == "both") return ShiftKind::both;
  throw Error("unknown shift kind '" + s + "'");
}

struct TargetShift {
  std::string name;
  ShiftKind kind = ShiftKind::amplitude;
  double scale = 1.0;         // amplitude: scale * prototype + offset + N(0, noise^2)
  double offset = 0.0;
  double noise = 0.3;         // replaces the source noise_sigma
  double max_displacement = 0.0;  // warp
};

struct SynthSpec {
  std::size_t length = 128;
  std::size_t channels = 1;
  std::vector<ClassPrototype> classes;
  double noise_sigma = 0.3;
  std::size_t n_per_class = 200;
  std::vector<TargetShift> targets;
  std::size_t half_width = 10;
  std::uint64_t seed = 0;

  void validate() const {
    if (classes.size() < 2) throw Error("synth: need at least 2 classes");
    if (length < window_length(half_width)) throw Error("synth: length shorter than 2M+1");
    if (channels == 0 || n_per_class == 0) throw Error("synth: channels and n_per_class must be positive");
    if (!(noise_sigma >= 0.0)) throw Error("synth: noise_sigma must be non-negative");
    for (const auto& proto : classes)
      for (const auto& c : proto.components)
        if (!(c.frequency >= 0.0 && c.frequency < static_cast<double>(length) / 4.0)) {
          throw Error("synth: frequency " + std::to_string(c.frequency) + " not below N/4");
        }
    for (const auto& t : targets) {
      if (t.kind != ShiftKind::amplitude &&
          (t.max_displacement < 0.0 || t.max_displacement > static_cast<double>(half_width) - 1.0)) {
        throw Error("synth: target '" + t.name + "' displacement must lie in [0, M-1]");
      }
      if (!(t.noise >= 0.0)) throw Error("synth: target '" + t.name + "' noise must be non-negative");
    }
  }
};

/// Benchmark defaults: three single-tone classes at 10, 12 and 14 cycles per
/// series, an SNR drop (signal x0.4, noise 0.5) as the amplitude shift and
/// smooth warps of up to 8 samples as the temporal shift.
inline SynthSpec default_synth_spec() {
  SynthSpec spec;
  spec.classes = {
      ClassPrototype{{{1.0, 10.0, 0.0}}},
      ClassPrototype{{{1.0, 12.0, 0.0}}},
      ClassPrototype{{{1.0, 14.0, 0.0}}},
  };
  spec.targets = {
      {"amplitude", ShiftKind::amplitude, 0.4, 0.0, 0.5, 0.0},
      {"warp", ShiftKind::warp, 1.0, 0.0, 0.0, 8.0},
      {"both", ShiftKind::both, 0.4, 0.0, 0.5, 8.0},
  };
  return spec;
}

/// Noise-free prototype of class `cls` as [channels x length]; channel c
/// shifts every component's phase by c * pi / 3.
inline Tensor class_prototype(const SynthSpec& spec, std::size_t cls) {
  const std::size_t n = spec.length;
  Tensor t = Tensor::zeros({spec.channels, n});
  const double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t c = 0; c < spec.channels; ++c)
    for (std::size_t i = 0; i < n; ++i) {
      double v = 0.0;
      for (const auto& s : spec.classes.at(cls).components)
        v += s.amplitude * std::sin(two_pi * s.frequency * static_cast<double>(i) / static_cast<double>(n) + s.phase +
                                    static_cast<double>(c) * std::numbers::pi / 3.0);
      t[c * n + i] = v;
    }
  return t;
}

/// Smooth admissible integer path: a Gaussian random walk pushed through
/// the warp constraint chain, then rounded (rounding keeps i + path[i]
/// nondecreasing, the endpoints at zero and |path| <= max_displacement).
inline std::vector<double> random_smooth_path(std::size_t length, double max_displacement, Rng& rng) {
  std::vector<double> path(length, 0.0);
  if (max_displacement <= 0.0) return path;
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> walk(length);
  double acc = 0.0;
  for (double& w : walk) w = (acc += gauss(rng));
  Tape tape;
  Var p = constrain_path(tape.constant(Tensor::vector(std::move(walk))), max_displacement);
  for (std::size_t i = 0; i < length; ++i) path[i] = std::round(p.value()[i]);
  return path;
}

struct SynthBenchmark {
  Dataset source;
  std::vector<Dataset> targets;
};

namespace detail {

/// Every sample is scale * prototype + offset + N(0, sigma^2).
inline Dataset draw_domain(const SynthSpec& spec, Rng& rng, const std::string& tag, double scale, double offset,
                           double sigma) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Dataset data;
  data.classes = spec.classes.size();
  data.label_names = default_label_names(data.classes);
  for (std::size_t cls = 0; cls < spec.classes.size(); ++cls) {
    const Tensor proto = class_prototype(spec, cls);
    for (std::size_t k = 0; k < spec.n_per_class; ++k) {
      TimeSeries ts{proto, static_cast<int>(cls), tag};
      for (double& v : ts.values.data()) v = scale * v + offset + sigma * gauss(rng);
      data.samples.push_back(std::move(ts));
    }
  }
  return data;
}

}  // namespace detail

/// Source domain plus one shifted copy of the source distribution per target.
/// Every domain draws from its own seeded stream.
inline SynthBenchmark synth_generate(const SynthSpec& spec) {
  spec.validate();
  SynthBenchmark bench;
  Rng source_rng(derive_seed(spec.seed, 0));
  bench.source = detail::draw_domain(spec, source_rng, "source", 1.0, 0.0, spec.noise_sigma);
  for (std::size_t t = 0; t < spec.targets.size(); ++t) {
    const TargetShift& shift = spec.targets[t];
    Rng rng(derive_seed(spec.seed, t + 1));
    const bool amp = shift.kind != ShiftKind::warp;
    Dataset target = amp ? detail::draw_domain(spec, rng, shift.name, shift.scale, shift.offset, shift.noise)
                         : detail::draw_domain(spec, rng, shift.name, 1.0, 0.0, spec.noise_sigma);
    if (shift.kind != ShiftKind::amplitude) {
      for (auto& s : target.samples) {
        s = integer_warp_oracle(s, random_smooth_path(spec.length, shift.max_displacement, rng));
      }
    }
    bench.targets.push_back(std::move(target));
  }
  return bench;
}

}  // namespace warpada
