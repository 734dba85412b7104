#pragma once

// Shallow 1-D CNN: three stride-2 conv layers (C -> 16 -> 32 -> 64, width 5,
// ReLU), global average pooling to a 64-d feature, affine head to logits.

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "warpada/random.hpp"
#include "warpada/tensor.hpp"

namespace warpada {

inline constexpr std::size_t kFeatureDim = 64;
inline constexpr std::size_t kKernelWidth = 5;
inline constexpr std::size_t kConvStride = 2;
inline constexpr std::array<std::size_t, 3> kConvChannels = {16, 32, 64};

/// Parameters bound to a tape for one forward pass.
struct BoundWeights {
  std::vector<Var> params;
};

struct ClassifierOutput {
  Var features;  // [64]
  Var logits;    // [classes]
};

class Classifier {
 public:
  Classifier() = default;

  /// Kaiming-uniform conv weights, fan-in scaled head, zero biases.
  Classifier(std::size_t channels, std::size_t length, std::size_t classes, std::uint64_t seed)
      : channels_(channels), length_(length), classes_(classes), seed_(seed) {
    if (channels == 0 || length == 0 || classes < 2) {
      throw Error("classifier needs channels >= 1, length >= 1 and classes >= 2");
    }
    Rng rng(seed);
    std::size_t in = channels;
    for (std::size_t out : kConvChannels) {
      const double bound = std::sqrt(6.0 / static_cast<double>(in * kKernelWidth));
      params_.push_back(random_tensor({out, in, kKernelWidth}, bound, rng));
      params_.push_back(Tensor::zeros({out}));
      in = out;
    }
    params_.push_back(random_tensor({classes, kFeatureDim}, std::sqrt(3.0 / kFeatureDim), rng));
    params_.push_back(Tensor::zeros({classes, 1}));
  }

  std::size_t channels() const { return channels_; }
  std::size_t length() const { return length_; }
  std::size_t classes() const { return classes_; }
  std::uint64_t seed() const { return seed_; }

  std::vector<Tensor>& params() { return params_; }
  const std::vector<Tensor>& params() const { return params_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.size();
    return n;
  }

  BoundWeights bind(Tape& tape, bool trainable) const {
    BoundWeights bound;
    for (const auto& p : params_) bound.params.push_back(tape.leaf(p, trainable));
    return bound;
  }

  ClassifierOutput forward(const BoundWeights& w, Var x) const {
    if (x.shape() != Shape{channels_, length_}) {
      throw Error("classifier expects input " + shape_string({channels_, length_}) + ", got " +
                  shape_string(x.shape()));
    }
    Tape& tape = x.tape();
    Var h = x;
    for (std::size_t layer = 0; layer < kConvChannels.size(); ++layer) {
      h = relu(add_bias(conv1d(h, w.params[2 * layer], kConvStride, kKernelWidth / 2), w.params[2 * layer + 1]));
    }
    const std::size_t steps = h.shape()[1];
    Var pool = tape.constant(Tensor::full({steps, 1}, 1.0 / static_cast<double>(steps)));
    Var z = matmul(h, pool);  // [64 x 1]
    Var logits = matmul(w.params[6], z) + w.params[7];
    return {reshape(z, {kFeatureDim}), reshape(logits, {classes_})};
  }

  /// Forward pass with frozen weights on a private tape.
  std::pair<Tensor, Tensor> predict(const Tensor& x) const {
    Tape tape;
    auto out = forward(bind(tape, false), tape.constant(x));
    return {out.features.value(), out.logits.value()};
  }

  int predict_label(const Tensor& x) const {
    const Tensor logits = predict(x).second;
    std::size_t best = 0;
    for (std::size_t k = 1; k < logits.size(); ++k)
      if (logits[k] > logits[best]) best = k;
    return static_cast<int>(best);
  }

  bool operator==(const Classifier&) const = default;

 private:
  static Tensor random_tensor(Shape shape, double bound, Rng& rng) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& v : t.data()) v = rng.uniform(-bound, bound);
    return t;
  }

  std::size_t channels_ = 0;
  std::size_t length_ = 0;
  std::size_t classes_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<Tensor> params_;
};

// ---------------------------------------------------------------------------
// Losses

/// log(sum(exp(logits))) with the max subtracted first.
inline Var log_sum_exp(Var logits) {
  Var peak = max_reduce(logits);
  return log(sum(exp(logits - peak))) + peak;
}

inline Var loss_ce(Var logits, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= logits.size()) {
    throw Error("loss_ce: label " + std::to_string(label) + " outside [0, " + std::to_string(logits.size()) + ")");
  }
  Var picked = gather(logits, std::vector<std::size_t>{static_cast<std::size_t>(label)}, {});
  return log_sum_exp(logits) - picked;
}

/// Entropy of softmax(logits).
inline Var entropy(Var logits) {
  Var log_p = logits - log_sum_exp(logits);
  return -sum(exp(log_p) * log_p);
}

/// Squared Euclidean distance between feature vectors.
inline Var semantic_distance(Var a, Var b) {
  if (a.shape() != b.shape()) {
    throw Error("semantic_distance: shape mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  Var d = a - b;
  return sum(d * d);
}

inline std::vector<double> softmax(std::span<const double> logits) {
  double peak = logits[0];
  for (double v : logits) peak = std::max(peak, v);
  std::vector<double> p(logits.size());
  double total = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) total += (p[k] = std::exp(logits[k] - peak));
  for (double& v : p) v /= total;
  return p;
}

// ---------------------------------------------------------------------------
// Checkpoint: "TADA1", u32 version, u32 channels, u32 length, u32 classes,
// u32 tensor count, per tensor (u32 rank, u32 dims...), u64 rng seed, then
// every tensor's float64 payload in order. All little-endian.

inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <class T>
void write_le(std::ostream& os, T value) {
  static_assert(std::is_integral_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) os.put(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff));
}

template <class T>
T read_le(std::istream& is, const std::string& path) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    const int c = is.get();
    if (c == EOF) throw Error("checkpoint " + path + ": truncated");
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return static_cast<T>(v);
}

}  // namespace detail

inline void save_checkpoint(const Classifier& model, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write checkpoint " + path);
  os.write("TADA1", 5);
  detail::write_le<std::uint32_t>(os, kCheckpointVersion);
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(model.channels()));
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(model.length()));
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(model.classes()));
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(model.params().size()));
  for (const auto& p : model.params()) {
    detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(p.rank()));
    for (std::size_t d : p.shape()) detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(d));
  }
  detail::write_le<std::uint64_t>(os, model.seed());
  for (const auto& p : model.params())
    for (double v : p.data()) detail::write_le<std::uint64_t>(os, std::bit_cast<std::uint64_t>(v));
  if (!os) throw Error("failed writing checkpoint " + path);
}

inline Classifier load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open checkpoint " + path);
  char magic[5] = {};
  is.read(magic, 5);
  if (!is || std::memcmp(magic, "TADA1", 5) != 0) throw Error("checkpoint " + path + ": bad magic");
  const auto version = detail::read_le<std::uint32_t>(is, path);
  if (version != kCheckpointVersion) {
    throw Error("checkpoint " + path + ": unsupported version " + std::to_string(version));
  }
  const auto channels = detail::read_le<std::uint32_t>(is, path);
  const auto length = detail::read_le<std::uint32_t>(is, path);
  const auto classes = detail::read_le<std::uint32_t>(is, path);
  const auto count = detail::read_le<std::uint32_t>(is, path);
  std::vector<Shape> shapes(count);
  for (auto& shape : shapes) {
    const auto rank = detail::read_le<std::uint32_t>(is, path);
    for (std::uint32_t r = 0; r < rank; ++r) shape.push_back(detail::read_le<std::uint32_t>(is, path));
  }
  const auto seed = detail::read_le<std::uint64_t>(is, path);

  Classifier model(channels, length, classes, seed);
  if (model.params().size() != count) throw Error("checkpoint " + path + ": unexpected tensor count");
  for (std::size_t t = 0; t < count; ++t) {
    Tensor& p = model.params()[t];
    if (p.shape() != shapes[t]) {
      throw Error("checkpoint " + path + ": tensor " + std::to_string(t) + " has shape " + shape_string(shapes[t]) +
                  ", expected " + shape_string(p.shape()));
    }
    for (double& v : p.data()) v = std::bit_cast<double>(detail::read_le<std::uint64_t>(is, path));
  }
  return model;
}

}  // namespace warpada
