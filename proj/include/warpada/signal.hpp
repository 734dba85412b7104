#pragma once

// Differentiable time warping through the frequency domain.
//
// Each sample i of a series is replaced by the center of its length-L window
// (L = 2M+1) after that window has been phase-shifted by path[i]. For integer
// shifts this reproduces plain index remapping x[i + path[i]]; for fractional
// shifts it is trigonometric interpolation of the window, and it is smooth in
// both the signal and the path.

#include <cmath>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "warpada/tensor.hpp"

namespace warpada {

/// Multichannel fixed-length series. values is [channels x length].
struct TimeSeries {
  Tensor values;
  int label = 0;
  std::string domain_tag;

  std::size_t channels() const { return values.dim(0); }
  std::size_t length() const { return values.dim(1); }
};

/// DFT coefficients of one window ([L]) or a batch of windows ([R x L]).
struct SpectrumFrame {
  Var re;
  Var im;
};

constexpr std::size_t window_length(std::size_t half_width) { return 2 * half_width + 1; }

namespace detail {

struct DftTables {
  Tensor cos_kn;       // [L x L], cos(2 pi k n / L)
  Tensor neg_sin_kn;   // [L x L], -sin(2 pi k n / L)
  Tensor signed_freq;  // [1 x L], 2 pi k~ / L with k~ the signed bin index
  Tensor center_cos;   // [L x 1], cos(2 pi k M / L) / L
  Tensor center_sin;   // [L x 1], sin(2 pi k M / L) / L
};

inline std::shared_ptr<const DftTables> dft_tables(std::size_t len) {
  thread_local std::unordered_map<std::size_t, std::shared_ptr<const DftTables>> cache;
  auto it = cache.find(len);
  if (it != cache.end()) return it->second;

  const double two_pi = 2.0 * std::numbers::pi;
  const double l = static_cast<double>(len);
  const std::size_t half = len / 2;
  auto tables = std::make_shared<DftTables>();
  tables->cos_kn = Tensor::zeros({len, len});
  tables->neg_sin_kn = Tensor::zeros({len, len});
  tables->signed_freq = Tensor::zeros({1, len});
  tables->center_cos = Tensor::zeros({len, 1});
  tables->center_sin = Tensor::zeros({len, 1});
  for (std::size_t k = 0; k < len; ++k) {
    for (std::size_t n = 0; n < len; ++n) {
      // Reduce k*n mod L first so large products keep full precision.
      const double angle = two_pi * static_cast<double>((k * n) % len) / l;
      tables->cos_kn[k * len + n] = std::cos(angle);
      tables->neg_sin_kn[k * len + n] = -std::sin(angle);
    }
    const double signed_k = k <= half ? static_cast<double>(k) : static_cast<double>(k) - l;
    tables->signed_freq[k] = two_pi * signed_k / l;
    const double center_angle = two_pi * static_cast<double>((k * half) % len) / l;
    tables->center_cos[k] = std::cos(center_angle) / l;
    tables->center_sin[k] = std::sin(center_angle) / l;
  }
  cache.emplace(len, tables);
  return tables;
}

inline Var as_rows(Var x) {
  if (x.shape().size() == 2) return x;
  if (x.shape().size() == 1) return reshape(x, {1, x.size()});
  throw Error("expected a window [L] or batch of windows [R x L], got " + shape_string(x.shape()));
}

}  // namespace detail

/// Flat gather indices that cut every channel of a [channels x length] series
/// into `length` windows of width 2M+1 centred on each sample, replicating the
/// edge samples beyond either end. Row order is channel-major.
inline std::vector<std::size_t> segment_indices(std::size_t channels, std::size_t length, std::size_t half_width) {
  const std::size_t len = window_length(half_width);
  std::vector<std::size_t> idx;
  idx.reserve(channels * length * len);
  const auto last = static_cast<std::ptrdiff_t>(length) - 1;
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t i = 0; i < length; ++i)
      for (std::size_t n = 0; n < len; ++n) {
        const std::ptrdiff_t src = std::clamp(
            static_cast<std::ptrdiff_t>(i + n) - static_cast<std::ptrdiff_t>(half_width), std::ptrdiff_t{0}, last);
        idx.push_back(c * length + static_cast<std::size_t>(src));
      }
  return idx;
}

inline void require_segmentable(std::size_t length, std::size_t half_width) {
  if (length < window_length(half_width)) {
    throw Error("series length " + std::to_string(length) + " is shorter than window 2M+1 = " +
                std::to_string(window_length(half_width)));
  }
}

/// On-tape segmentation of values [C x N] into [C*N x L].
inline Var segment_rows(Var values, std::size_t half_width) {
  if (values.shape().size() != 2) throw Error("segment_rows expects [C x N], got " + shape_string(values.shape()));
  const std::size_t channels = values.shape()[0], length = values.shape()[1];
  require_segmentable(length, half_width);
  return gather(values, segment_indices(channels, length, half_width),
                {channels * length, window_length(half_width)});
}

/// Windows of every channel, channel-major: element c*N + i is the window
/// centred on sample i of channel c.
inline std::vector<Tensor> segment(const TimeSeries& x, std::size_t half_width) {
  require_segmentable(x.length(), half_width);
  const auto idx = segment_indices(x.channels(), x.length(), half_width);
  const std::size_t len = window_length(half_width);
  std::vector<Tensor> out;
  out.reserve(x.channels() * x.length());
  for (std::size_t r = 0; r < x.channels() * x.length(); ++r) {
    std::vector<double> window(len);
    for (std::size_t n = 0; n < len; ++n) window[n] = x.values[idx[r * len + n]];
    out.push_back(Tensor::vector(std::move(window)));
  }
  return out;
}

/// Forward DFT as two matrix products (kept on the tape).
inline SpectrumFrame dft_forward(Var segments) {
  const bool single = segments.shape().size() == 1;
  Var rows = detail::as_rows(segments);
  const std::size_t len = rows.shape()[1];
  if (len == 0) throw Error("dft_forward: empty window");
  const auto tables = detail::dft_tables(len);
  Tape& tape = segments.tape();
  // Both tables are symmetric, so rows * T equals the usual T * row^T.
  Var re = matmul(rows, tape.constant(tables->cos_kn));
  Var im = matmul(rows, tape.constant(tables->neg_sin_kn));
  if (single) return {reshape(re, {len}), reshape(im, {len})};
  return {re, im};
}

/// Multiplies bin k by exp(+j 2 pi k~ delta / L), k~ the signed bin index.
/// Positive delta advances the window: its centre then reads x[i + delta].
/// delta is a scalar for a single frame and [R] for a batch.
inline SpectrumFrame phase_shift(const SpectrumFrame& frame, Var delta, std::size_t len) {
  const bool single = frame.re.shape().size() == 1;
  Var re = detail::as_rows(frame.re);
  Var im = detail::as_rows(frame.im);
  const std::size_t rows = re.shape()[0];
  if (re.shape()[1] != len || im.shape() != re.shape()) {
    throw Error("phase_shift: frame shape " + shape_string(frame.re.shape()) + " does not match L = " +
                std::to_string(len));
  }
  if (delta.size() != rows) {
    throw Error("phase_shift: " + std::to_string(delta.size()) + " shifts for " + std::to_string(rows) + " frames");
  }
  Tape& tape = delta.tape();
  const auto tables = detail::dft_tables(len);
  Var angle = matmul(reshape(delta, {rows, 1}), tape.constant(tables->signed_freq));
  Var c = cos(angle);
  Var s = sin(angle);
  Var out_re = re * c - im * s;
  Var out_im = re * s + im * c;
  if (single) return {reshape(out_re, {len}), reshape(out_im, {len})};
  return {out_re, out_im};
}

/// Inverse DFT evaluated only at the centre sample n = M of each window.
inline Var center_extract(const SpectrumFrame& frame, std::size_t len) {
  const bool single = frame.re.shape().size() == 1;
  Var re = detail::as_rows(frame.re);
  Var im = detail::as_rows(frame.im);
  if (re.shape()[1] != len || len % 2 == 0) {
    throw Error("center_extract: frame shape " + shape_string(frame.re.shape()) + " does not match odd L = " +
                std::to_string(len));
  }
  Tape& tape = re.tape();
  const auto tables = detail::dft_tables(len);
  Var out = matmul(re, tape.constant(tables->center_cos)) - matmul(im, tape.constant(tables->center_sin));
  if (single) return reshape(out, {});
  return reshape(out, {re.shape()[0]});
}

/// Warps values [C x N] by path [N]; every channel shares the path.
inline Var warp_apply(Var values, Var path, std::size_t half_width) {
  if (values.shape().size() != 2) throw Error("warp_apply expects [C x N] values, got " + shape_string(values.shape()));
  const std::size_t channels = values.shape()[0], length = values.shape()[1];
  if (path.size() != length) {
    throw Error("warp_apply: path length " + std::to_string(path.size()) + " does not match series length " +
                std::to_string(length));
  }
  const double limit = static_cast<double>(half_width);
  for (std::size_t i = 0; i < length; ++i) {
    const double d = path.value()[i];
    if (!(std::fabs(d) <= limit)) {
      throw Error("warp_apply: displacement " + std::to_string(d) + " at index " + std::to_string(i) +
                  " exceeds half-width " + std::to_string(half_width));
    }
  }
  const std::size_t len = window_length(half_width);
  Var rows = segment_rows(values, half_width);
  Var delta = path;
  if (channels != 1 || path.shape().size() != 1) {
    std::vector<std::size_t> rep(channels * length);
    for (std::size_t r = 0; r < rep.size(); ++r) rep[r] = r % length;
    delta = gather(path, std::move(rep), {channels * length});
  }
  Var centers = center_extract(phase_shift(dft_forward(rows), delta, len), len);
  return reshape(centers, {channels, length});
}

inline TimeSeries warp_apply(const TimeSeries& x, std::span<const double> path, std::size_t half_width) {
  Tape tape;
  Var out = warp_apply(tape.constant(x.values), tape.constant(Tensor::vector({path.begin(), path.end()})), half_width);
  return {out.value(), x.label, x.domain_tag};
}

/// Reference warp by direct index mapping: out[c][i] = x[c][clamp(i + path[i])].
inline TimeSeries integer_warp_oracle(const TimeSeries& x, std::span<const double> path) {
  const std::size_t channels = x.channels(), length = x.length();
  if (path.size() != length) {
    throw Error("integer_warp_oracle: path length " + std::to_string(path.size()) + " does not match " +
                std::to_string(length));
  }
  TimeSeries out{Tensor::zeros({channels, length}), x.label, x.domain_tag};
  const auto last = static_cast<std::ptrdiff_t>(length) - 1;
  for (std::size_t i = 0; i < length; ++i) {
    if (path[i] != std::round(path[i])) {
      throw Error("integer_warp_oracle: fractional displacement " + std::to_string(path[i]) + " at index " +
                  std::to_string(i));
    }
    const std::ptrdiff_t src =
        std::clamp(static_cast<std::ptrdiff_t>(i) + static_cast<std::ptrdiff_t>(path[i]), std::ptrdiff_t{0}, last);
    for (std::size_t c = 0; c < channels; ++c)
      out.values[c * length + i] = x.values[c * length + static_cast<std::size_t>(src)];
  }
  return out;
}

}  // namespace warpada
