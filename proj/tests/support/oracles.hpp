#pragma once

// Straight-loop reference implementations, written independently of the
// library kernels, plus a central-difference gradient checker.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "boneage/image.hpp"
#include "boneage/ops.hpp"
#include "boneage/tensor.hpp"

namespace boneage::testing {

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, float lo = -1.0f, float hi = 1.0f) {
  std::uniform_real_distribution<float> dist(lo, hi);
  Tensor t(std::move(shape));
  for (float& v : t.data()) v = dist(rng);
  return t;
}

inline std::vector<float> oracle_conv2d(const Tensor& in, const Tensor& k, const Tensor& b,
                                        int stride, int pad) {
  const int N = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
  const int F = k.dim(0), KH = k.dim(2), KW = k.dim(3);
  const int OH = (H + 2 * pad - KH) / stride + 1, OW = (W + 2 * pad - KW) / stride + 1;
  std::vector<float> out(static_cast<std::size_t>(N) * F * OH * OW);
  for (int n = 0; n < N; ++n)
    for (int f = 0; f < F; ++f)
      for (int oy = 0; oy < OH; ++oy)
        for (int ox = 0; ox < OW; ++ox) {
          double acc = b.data()[f];
          for (int c = 0; c < C; ++c)
            for (int ky = 0; ky < KH; ++ky)
              for (int kx = 0; kx < KW; ++kx) {
                const int iy = oy * stride + ky - pad, ix = ox * stride + kx - pad;
                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                acc += static_cast<double>(in.data()[((n * C + c) * H + iy) * W + ix]) *
                       k.data()[((f * C + c) * KH + ky) * KW + kx];
              }
          out[((n * F + f) * OH + oy) * OW + ox] = static_cast<float>(acc);
        }
  return out;
}

inline std::vector<float> oracle_max_pool(const Tensor& in) {
  const int N = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
  std::vector<float> out;
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int y = 0; y < H; y += 2)
        for (int x = 0; x < W; x += 2) {
          const float* p = in.data().data() + (n * C + c) * H * W;
          out.push_back(std::max({p[y * W + x], p[y * W + x + 1], p[(y + 1) * W + x],
                                  p[(y + 1) * W + x + 1]}));
        }
  return out;
}

inline std::vector<float> oracle_upsample(const Tensor& in) {
  const int N = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
  std::vector<float> out(static_cast<std::size_t>(N) * C * 4 * H * W);
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int y = 0; y < 2 * H; ++y)
        for (int x = 0; x < 2 * W; ++x)
          out[((n * C + c) * 2 * H + y) * 2 * W + x] = in.data()[((n * C + c) * H + y / 2) * W + x / 2];
  return out;
}

inline std::vector<float> oracle_dense(const Tensor& in, const Tensor& w, const Tensor& b) {
  const int N = in.dim(0), D = in.dim(1), M = w.dim(1);
  std::vector<float> out(static_cast<std::size_t>(N) * M);
  for (int n = 0; n < N; ++n)
    for (int m = 0; m < M; ++m) {
      double acc = b.data()[m];
      for (int d = 0; d < D; ++d) acc += static_cast<double>(in.data()[n * D + d]) * w.data()[d * M + m];
      out[n * M + m] = static_cast<float>(acc);
    }
  return out;
}

inline GrayImage oracle_resize(const GrayImage& img, int ow, int oh) {
  std::vector<float> px(static_cast<std::size_t>(ow) * oh);
  const double sx = static_cast<double>(img.width()) / ow, sy = static_cast<double>(img.height()) / oh;
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, img.width() - 1.0);
      const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, img.height() - 1.0);
      const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
      const int x1 = std::min(x0 + 1, img.width() - 1), y1 = std::min(y0 + 1, img.height() - 1);
      const double ax = fx - x0, ay = fy - y0;
      const double top = img.at(x0, y0) * (1 - ax) + img.at(x1, y0) * ax;
      const double bottom = img.at(x0, y1) * (1 - ax) + img.at(x1, y1) * ax;
      px[static_cast<std::size_t>(y) * ow + x] = static_cast<float>(top * (1 - ay) + bottom * ay);
    }
  return GrayImage(ow, oh, px);
}

inline GrayImage oracle_shift(const GrayImage& img, int dx, int dy) {
  GrayImage out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      const int sx = x - dx, sy = y - dy;
      if (sx >= 0 && sx < img.width() && sy >= 0 && sy < img.height()) out.at(x, y) = img.at(sx, sy);
    }
  return out;
}

/// Result of comparing reverse-mode gradients with central differences.
struct GradCheck {
  double max_rel_error = 0.0;
  std::string worst;  ///< "<input>[<index>]: analytic vs numeric"
};

/// Weighted sum with fixed random weights, so every output element gets a
/// distinct upstream gradient.
inline Tensor probe(Tape& tape, const Tensor& out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Tensor weights = random_tensor(out.shape(), rng);
  return sum(tape, mul(tape, out, weights));
}

/// `f` builds an output tensor from `inputs` on the given tape. The checked
/// function is the projection of that output onto fixed random weights; on
/// the numeric side it is accumulated in double. Every input is perturbed by
/// +-step in turn and the relative error of each gradient entry is
/// |a - n| / max(1, |a|, |n|).
inline GradCheck check_gradients(std::vector<Tensor> inputs,
                                 const std::function<Tensor(Tape&, std::vector<Tensor>&)>& f,
                                 float step = 1e-3f, std::uint64_t probe_seed = 99) {
  for (Tensor& t : inputs) t.set_requires_grad(true);
  Tape tape;
  const Tensor out = f(tape, inputs);
  tape.backward(probe(tape, out, probe_seed));

  std::mt19937_64 rng(probe_seed);
  const Tensor weights = random_tensor(out.shape(), rng);
  auto projected = [&]() {
    Tape t = Tape::inference();
    const Tensor y = f(t, inputs);
    double acc = 0.0;
    for (std::size_t k = 0; k < y.numel(); ++k) {
      acc += static_cast<double>(weights.data()[k]) * static_cast<double>(y.data()[k]);
    }
    return acc;
  };

  GradCheck result;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    std::vector<float> analytic(inputs[i].numel(), 0.0f);
    if (inputs[i].has_grad()) {
      std::copy(inputs[i].grad().begin(), inputs[i].grad().end(), analytic.begin());
    }
    auto values = inputs[i].data();
    for (std::size_t j = 0; j < values.size(); ++j) {
      const float saved = values[j];
      const float up = saved + step, down = saved - step;
      values[j] = up;
      const double plus = projected();
      values[j] = down;
      const double minus = projected();
      values[j] = saved;
      const double numeric = (plus - minus) / (static_cast<double>(up) - static_cast<double>(down));
      const double a = analytic[j];
      const double rel = std::fabs(a - numeric) / std::max({1.0, std::fabs(a), std::fabs(numeric)});
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst = "input " + std::to_string(i) + "[" + std::to_string(j) +
                       "]: " + std::to_string(a) + " vs " + std::to_string(numeric);
      }
    }
  }
  return result;
}

}  // namespace boneage::testing
