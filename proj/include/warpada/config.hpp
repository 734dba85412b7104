#pragma once

// Run configuration: a flat "key = value" file. Lines starting with '#' are
// comments. Unknown keys are rejected; every key has a default.

#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "warpada/adversarial.hpp"
#include "warpada/data.hpp"
#include "warpada/training.hpp"

namespace warpada {

class ConfigError : public Error {
 public:
  using Error::Error;
};

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) parts.push_back(item.substr(b, e - b + 1));
  }
  return parts;
}

/// "amp:freq:phase,amp:freq:phase;..." with ';' between classes.
inline std::vector<ClassPrototype> parse_prototypes(const std::string& s) {
  std::vector<ClassPrototype> out;
  for (const auto& cls : split(s, ';')) {
    ClassPrototype proto;
    for (const auto& comp : split(cls, ',')) {
      const auto f = split(comp, ':');
      if (f.size() != 3) throw ConfigError("synth.classes: component '" + comp + "' is not amp:freq:phase");
      try {
        proto.components.push_back({std::stod(f[0]), std::stod(f[1]), std::stod(f[2])});
      } catch (const std::exception&) {
        throw ConfigError("synth.classes: component '" + comp + "' is not numeric");
      }
    }
    out.push_back(std::move(proto));
  }
  return out;
}

inline std::string format_prototypes(const std::vector<ClassPrototype>& classes) {
  std::ostringstream os;
  os << std::setprecision(17);
  for (std::size_t c = 0; c < classes.size(); ++c) {
    if (c) os << ';';
    for (std::size_t k = 0; k < classes[c].components.size(); ++k) {
      const auto& s = classes[c].components[k];
      os << (k ? "," : "") << s.amplitude << ':' << s.frequency << ':' << s.phase;
    }
  }
  return os.str();
}

struct RunConfig {
  AdvConfig adv;
  TrainOptions train;
  bool me = false;  // enables the entropy term with me_beta (0.1 unless me_beta is set)
  bool me_beta_set = false;
  std::string out_dir = "out";
  std::string train_manifest;
  std::vector<std::string> eval_manifests;

  // Synthetic benchmark; amplitude and warp parameters are shared by every
  // target of that kind.
  std::size_t synth_length = 0;
  std::size_t synth_channels = 0;
  std::size_t synth_n_per_class = 0;
  double synth_noise = 0.0;
  std::vector<ClassPrototype> synth_classes;
  std::vector<std::string> synth_targets;
  double amp_scale = 1.0;
  double amp_offset = 0.0;
  double amp_noise = 0.0;
  double warp_disp = 0.0;

  RunConfig() {
    adv.gamma = 0.1;
    adv.t_min = 100;
    adv.t_final = 30;
    adv.phi_max = 4.0;
    train.lr = 0.02;
    const SynthSpec spec = default_synth_spec();
    synth_length = spec.length;
    synth_channels = spec.channels;
    synth_n_per_class = spec.n_per_class;
    synth_noise = spec.noise_sigma;
    synth_classes = spec.classes;
    for (const auto& t : spec.targets) {
      synth_targets.push_back(t.name);
      if (t.kind != ShiftKind::warp) {
        amp_scale = t.scale;
        amp_offset = t.offset;
        amp_noise = t.noise;
      }
      if (t.kind != ShiftKind::amplitude) warp_disp = t.max_displacement;
    }
  }

  /// me_beta actually used by the adversarial objective.
  AdvConfig resolved_adv() const {
    AdvConfig a = adv;
    if (me && !me_beta_set) a.me_beta = 0.1;
    return a;
  }

  SynthSpec synth_spec() const {
    SynthSpec spec;
    spec.length = synth_length;
    spec.channels = synth_channels;
    spec.classes = synth_classes;
    spec.noise_sigma = synth_noise;
    spec.n_per_class = synth_n_per_class;
    spec.half_width = adv.m_window;
    spec.seed = adv.seed;
    for (const auto& name : synth_targets) {
      const ShiftKind kind = parse_shift_kind(name);
      TargetShift t;
      t.name = name;
      t.kind = kind;
      if (kind != ShiftKind::warp) {
        t.scale = amp_scale;
        t.offset = amp_offset;
        t.noise = amp_noise;
      }
      if (kind != ShiftKind::amplitude) t.max_displacement = warp_disp;
      spec.targets.push_back(t);
    }
    return spec;
  }

  void set(const std::string& key, const std::string& value) {
    auto as_double = [&] {
      try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument("trailing");
        return v;
      } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': '" + value + "' is not a number");
      }
    };
    auto as_size = [&] {
      const double v = as_double();
      if (v < 0 || v != std::floor(v)) throw ConfigError("config key '" + key + "': '" + value + "' is not a count");
      return static_cast<std::size_t>(v);
    };
    auto as_bool = [&] {
      if (value == "true" || value == "1" || value == "yes") return true;
      if (value == "false" || value == "0" || value == "no") return false;
      throw ConfigError("config key '" + key + "': '" + value + "' is not a boolean");
    };
    try {
      if (key == "seed") adv.seed = std::stoull(value);
      else if (key == "mode") adv.mode = parse_mode(value);
      else if (key == "combine") adv.combine = parse_combine(value);
      else if (key == "gamma") adv.gamma = as_double();
      else if (key == "eta") adv.eta = as_double();
      else if (key == "eta_amp") adv.eta_amp = as_double();
      else if (key == "t_max") adv.t_max = as_size();
      else if (key == "t_min") adv.t_min = as_size();
      else if (key == "k_rounds") adv.k_rounds = as_size();
      else if (key == "t_final") adv.t_final = as_size();
      else if (key == "m_window") adv.m_window = as_size();
      else if (key == "phi_max") adv.phi_max = as_double();
      else if (key == "phi_init") adv.phi_init = as_double();
      else if (key == "me") me = as_bool();
      else if (key == "me_beta") { adv.me_beta = as_double(); me_beta_set = true; }
      else if (key == "lr") train.lr = as_double();
      else if (key == "batch") train.batch = as_size();
      else if (key == "jobs") train.jobs = as_size();
      else if (key == "out_dir") out_dir = value;
      else if (key == "train_manifest") train_manifest = value;
      else if (key == "eval_manifests") eval_manifests = split(value, ',');
      else if (key == "synth.length") synth_length = as_size();
      else if (key == "synth.channels") synth_channels = as_size();
      else if (key == "synth.n_per_class") synth_n_per_class = as_size();
      else if (key == "synth.noise_sigma") synth_noise = as_double();
      else if (key == "synth.classes") synth_classes = parse_prototypes(value);
      else if (key == "synth.targets") synth_targets = split(value, ',');
      else if (key == "synth.amp_scale") amp_scale = as_double();
      else if (key == "synth.amp_offset") amp_offset = as_double();
      else if (key == "synth.amp_noise") amp_noise = as_double();
      else if (key == "synth.warp_disp") warp_disp = as_double();
      else throw ConfigError("unknown config key '" + key + "'");
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError("config key '" + key + "': " + e.what());
    }
  }

  /// Every key with its resolved value, in a fixed order.
  std::vector<std::pair<std::string, std::string>> echo() const {
    auto num = [](double v) {
      std::ostringstream os;
      os << std::setprecision(17) << v;
      return os.str();
    };
    std::string evals;
    for (std::size_t i = 0; i < eval_manifests.size(); ++i) evals += (i ? "," : "") + eval_manifests[i];
    std::string targets;
    for (std::size_t i = 0; i < synth_targets.size(); ++i) targets += (i ? "," : "") + synth_targets[i];
    const AdvConfig a = resolved_adv();
    return {
        {"seed", std::to_string(a.seed)},
        {"mode", to_string(a.mode)},
        {"combine", to_string(a.combine)},
        {"gamma", num(a.gamma)},
        {"eta", num(a.eta)},
        {"eta_amp", num(a.eta_amp)},
        {"t_max", std::to_string(a.t_max)},
        {"t_min", std::to_string(a.t_min)},
        {"k_rounds", std::to_string(a.k_rounds)},
        {"t_final", std::to_string(a.t_final)},
        {"m_window", std::to_string(a.m_window)},
        {"phi_max", num(a.phi_max)},
        {"phi_init", num(a.phi_init)},
        {"me", me ? "true" : "false"},
        {"me_beta", num(a.me_beta)},
        {"lr", num(train.lr)},
        {"batch", std::to_string(train.batch)},
        {"jobs", std::to_string(train.jobs)},
        {"out_dir", out_dir},
        {"train_manifest", train_manifest},
        {"eval_manifests", evals},
        {"synth.length", std::to_string(synth_length)},
        {"synth.channels", std::to_string(synth_channels)},
        {"synth.n_per_class", std::to_string(synth_n_per_class)},
        {"synth.noise_sigma", num(synth_noise)},
        {"synth.classes", format_prototypes(synth_classes)},
        {"synth.targets", targets},
        {"synth.amp_scale", num(amp_scale)},
        {"synth.amp_offset", num(amp_offset)},
        {"synth.amp_noise", num(amp_noise)},
        {"synth.warp_disp", num(warp_disp)},
    };
  }
};

inline RunConfig parse_config(std::istream& in, const std::string& source = "<config>") {
  RunConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

/// Defaults when path is empty; WARPADA_SEED overrides the seed either way.
inline RunConfig load_config(const std::string& path) {
  RunConfig cfg;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    cfg = parse_config(in, path);
  }
  if (const char* env = std::getenv("WARPADA_SEED"); env && *env) cfg.set("seed", env);
  return cfg;
}

inline void write_config_echo(const RunConfig& cfg, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& [k, v] : cfg.echo()) out << k << " = " << v << '\n';
}

}  // namespace warpada
