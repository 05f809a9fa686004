#include "boneage/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>

#include "boneage/error.hpp"

namespace boneage {
namespace {

Tensor make_output(Shape shape, bool tracked) {
  Tensor out(std::move(shape));
  out.set_requires_grad(tracked);
  return out;
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    std::ostringstream msg;
    msg << op << ": expected rank " << rank << ", got shape " << shape_string(t.shape());
    throw DimensionError(msg.str());
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    std::ostringstream msg;
    msg << op << ": shape mismatch " << shape_string(a.shape()) << " vs "
        << shape_string(b.shape());
    throw DimensionError(msg.str());
  }
}

// Fixed-order dot product with eight interleaved partial sums.
float dot(const float* a, const float* b, std::size_t n) {
  float acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    for (int l = 0; l < 8; ++l) acc[l] += a[i + l] * b[i + l];
  }
  float total = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
  for (; i < n; ++i) total += a[i] * b[i];
  return total;
}

void axpy(float alpha, const float* x, float* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

struct ConvGeometry {
  std::size_t channels, height, width;
  std::size_t kh, kw, stride, padding;
  std::size_t out_h, out_w;

  std::size_t patch() const { return channels * kh * kw; }
  std::size_t positions() const { return out_h * out_w; }
};

void im2col(const float* image, const ConvGeometry& g, float* col) {
  const std::size_t positions = g.positions();
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        float* row = col + ((c * g.kh + i) * g.kw + j) * positions;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + i) -
                          static_cast<std::ptrdiff_t>(g.padding);
          float* dst = row + oy * g.out_w;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) {
            std::fill(dst, dst + g.out_w, 0.0f);
            continue;
          }
          const float* src = image + (c * g.height + static_cast<std::size_t>(iy)) * g.width;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + j) -
                            static_cast<std::ptrdiff_t>(g.padding);
            dst[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.width))
                          ? 0.0f
                          : src[static_cast<std::size_t>(ix)];
          }
        }
      }
    }
  }
}

void col2im_add(const float* col, const ConvGeometry& g, float* image) {
  const std::size_t positions = g.positions();
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        const float* row = col + ((c * g.kh + i) * g.kw + j) * positions;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + i) -
                          static_cast<std::ptrdiff_t>(g.padding);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) continue;
          float* dst = image + (c * g.height + static_cast<std::size_t>(iy)) * g.width;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + j) -
                            static_cast<std::ptrdiff_t>(g.padding);
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(g.width)) {
              dst[static_cast<std::size_t>(ix)] += row[oy * g.out_w + ox];
            }
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(Tape& tape, const Tensor& input, const Tensor& kernel, const Tensor& bias,
              std::size_t stride, std::size_t padding) {
  require_rank(input, 4, "conv2d input");
  require_rank(kernel, 4, "conv2d kernel");
  require_rank(bias, 1, "conv2d bias");
  if (stride == 0) throw ContractError("conv2d: stride must be positive");
  const std::size_t batch = input.dim(0);
  const std::size_t filters = kernel.dim(0);
  ConvGeometry g{input.dim(1), input.dim(2), input.dim(3), kernel.dim(2), kernel.dim(3),
                 stride, padding, 0, 0};
  if (kernel.dim(1) != g.channels) {
    std::ostringstream msg;
    msg << "conv2d: kernel expects " << kernel.dim(1) << " channels, input has " << g.channels;
    throw DimensionError(msg.str());
  }
  if (bias.dim(0) != filters) throw DimensionError("conv2d: bias length must equal filter count");
  if (g.kh > g.height + 2 * padding || g.kw > g.width + 2 * padding) {
    throw DimensionError("conv2d: kernel larger than padded input");
  }
  g.out_h = (g.height + 2 * padding - g.kh) / stride + 1;
  g.out_w = (g.width + 2 * padding - g.kw) / stride + 1;

  const bool tracked = tape.tracks({&input, &kernel, &bias});
  Tensor out = make_output({batch, filters, g.out_h, g.out_w}, tracked);

  const std::size_t patch = g.patch();
  const std::size_t positions = g.positions();
  const std::size_t in_stride = g.channels * g.height * g.width;
  std::vector<float> col(patch * positions);
  const float* x = input.data().data();
  const float* w = kernel.data().data();
  const float* b = bias.data().data();
  float* y = out.data().data();
  for (std::size_t n = 0; n < batch; ++n) {
    im2col(x + n * in_stride, g, col.data());
    float* yn = y + n * filters * positions;
    for (std::size_t f = 0; f < filters; ++f) {
      float* row = yn + f * positions;
      for (std::size_t k = 0; k < patch; ++k) axpy(w[f * patch + k], col.data() + k * positions, row, positions);
      for (std::size_t p = 0; p < positions; ++p) row[p] += b[f];
    }
  }

  if (tracked) {
    tape.record("conv2d", {input, kernel, bias}, out,
                [input, kernel, bias, out, g, batch, filters]() mutable {
                  const std::size_t patch = g.patch();
                  const std::size_t positions = g.positions();
                  const std::size_t in_stride = g.channels * g.height * g.width;
                  const float* dy = out.grad().data();
                  const float* x = input.data().data();
                  const float* w = kernel.data().data();
                  std::vector<float> col(patch * positions);
                  if (bias.requires_grad()) {
                    float* db = bias.grad_buffer().data();
                    for (std::size_t n = 0; n < batch; ++n) {
                      for (std::size_t f = 0; f < filters; ++f) {
                        const float* row = dy + (n * filters + f) * positions;
                        float s = 0.0f;
                        for (std::size_t p = 0; p < positions; ++p) s += row[p];
                        db[f] += s;
                      }
                    }
                  }
                  if (kernel.requires_grad()) {
                    float* dw = kernel.grad_buffer().data();
                    for (std::size_t n = 0; n < batch; ++n) {
                      im2col(x + n * in_stride, g, col.data());
                      const float* dyn = dy + n * filters * positions;
                      for (std::size_t f = 0; f < filters; ++f) {
                        for (std::size_t k = 0; k < patch; ++k) {
                          dw[f * patch + k] +=
                              dot(dyn + f * positions, col.data() + k * positions, positions);
                        }
                      }
                    }
                  }
                  if (input.requires_grad()) {
                    float* dx = input.grad_buffer().data();
                    for (std::size_t n = 0; n < batch; ++n) {
                      std::fill(col.begin(), col.end(), 0.0f);
                      const float* dyn = dy + n * filters * positions;
                      for (std::size_t f = 0; f < filters; ++f) {
                        for (std::size_t k = 0; k < patch; ++k) {
                          axpy(w[f * patch + k], dyn + f * positions, col.data() + k * positions,
                               positions);
                        }
                      }
                      col2im_add(col.data(), g, dx + n * in_stride);
                    }
                  }
                });
  }
  return out;
}

Tensor max_pool2d(Tape& tape, const Tensor& input) {
  require_rank(input, 4, "max_pool2d");
  const std::size_t batch = input.dim(0), channels = input.dim(1);
  const std::size_t height = input.dim(2), width = input.dim(3);
  if (height % 2 != 0 || width % 2 != 0) {
    throw DimensionError("max_pool2d: spatial extents must be even, got " +
                         shape_string(input.shape()));
  }
  const std::size_t oh = height / 2, ow = width / 2;
  const bool tracked = tape.tracks({&input});
  Tensor out = make_output({batch, channels, oh, ow}, tracked);
  std::vector<std::uint32_t> argmax(out.numel());
  const float* x = input.data().data();
  float* y = out.data().data();
  std::size_t o = 0;
  for (std::size_t plane = 0; plane < batch * channels; ++plane) {
    const std::size_t base = plane * height * width;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox, ++o) {
        std::size_t best = base + (2 * oy) * width + 2 * ox;
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = base + (2 * oy + dy) * width + 2 * ox + dx;
            if (x[idx] > x[best]) best = idx;
          }
        }
        argmax[o] = static_cast<std::uint32_t>(best);
        y[o] = x[best];
      }
    }
  }
  if (tracked) {
    tape.record("max_pool2d", {input}, out, [input, out, argmax = std::move(argmax)]() mutable {
      const float* dy = out.grad().data();
      float* dx = input.grad_buffer().data();
      for (std::size_t i = 0; i < argmax.size(); ++i) dx[argmax[i]] += dy[i];
    });
  }
  return out;
}

Tensor upsample2x(Tape& tape, const Tensor& input) {
  require_rank(input, 4, "upsample2x");
  const std::size_t planes = input.dim(0) * input.dim(1);
  const std::size_t height = input.dim(2), width = input.dim(3);
  const bool tracked = tape.tracks({&input});
  Tensor out = make_output({input.dim(0), input.dim(1), 2 * height, 2 * width}, tracked);
  const float* x = input.data().data();
  float* y = out.data().data();
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t oy = 0; oy < 2 * height; ++oy) {
      const float* src = x + (p * height + oy / 2) * width;
      float* dst = y + (p * 2 * height + oy) * 2 * width;
      for (std::size_t ox = 0; ox < 2 * width; ++ox) dst[ox] = src[ox / 2];
    }
  }
  if (tracked) {
    tape.record("upsample2x", {input}, out, [input, out, planes, height, width]() mutable {
      const float* dy = out.grad().data();
      float* dx = input.grad_buffer().data();
      for (std::size_t p = 0; p < planes; ++p) {
        for (std::size_t oy = 0; oy < 2 * height; ++oy) {
          const float* src = dy + (p * 2 * height + oy) * 2 * width;
          float* dst = dx + (p * height + oy / 2) * width;
          for (std::size_t ox = 0; ox < 2 * width; ++ox) dst[ox / 2] += src[ox];
        }
      }
    });
  }
  return out;
}

Tensor concat_channels(Tape& tape, const Tensor& a, const Tensor& b) {
  require_rank(a, 4, "concat_channels");
  require_rank(b, 4, "concat_channels");
  if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3)) {
    throw DimensionError("concat_channels: mismatched " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()));
  }
  const std::size_t batch = a.dim(0), ca = a.dim(1), cb = b.dim(1);
  const std::size_t plane = a.dim(2) * a.dim(3);
  const bool tracked = tape.tracks({&a, &b});
  Tensor out = make_output({batch, ca + cb, a.dim(2), a.dim(3)}, tracked);
  float* y = out.data().data();
  for (std::size_t n = 0; n < batch; ++n) {
    std::copy_n(a.data().data() + n * ca * plane, ca * plane, y + n * (ca + cb) * plane);
    std::copy_n(b.data().data() + n * cb * plane, cb * plane, y + (n * (ca + cb) + ca) * plane);
  }
  if (tracked) {
    tape.record("concat_channels", {a, b}, out, [a, b, out, batch, ca, cb, plane]() mutable {
      const float* dy = out.grad().data();
      if (a.requires_grad()) {
        float* da = a.grad_buffer().data();
        for (std::size_t n = 0; n < batch; ++n) {
          axpy(1.0f, dy + n * (ca + cb) * plane, da + n * ca * plane, ca * plane);
        }
      }
      if (b.requires_grad()) {
        float* db = b.grad_buffer().data();
        for (std::size_t n = 0; n < batch; ++n) {
          axpy(1.0f, dy + (n * (ca + cb) + ca) * plane, db + n * cb * plane, cb * plane);
        }
      }
    });
  }
  return out;
}

Tensor dense(Tape& tape, const Tensor& input, const Tensor& weight, const Tensor& bias) {
  require_rank(input, 2, "dense input");
  require_rank(weight, 2, "dense weight");
  require_rank(bias, 1, "dense bias");
  const std::size_t batch = input.dim(0), in = input.dim(1), outs = weight.dim(1);
  if (weight.dim(0) != in || bias.dim(0) != outs) {
    std::ostringstream msg;
    msg << "dense: input " << shape_string(input.shape()) << ", weight "
        << shape_string(weight.shape()) << ", bias " << shape_string(bias.shape());
    throw DimensionError(msg.str());
  }
  const bool tracked = tape.tracks({&input, &weight, &bias});
  Tensor out = make_output({batch, outs}, tracked);
  const float* x = input.data().data();
  const float* w = weight.data().data();
  const float* b = bias.data().data();
  float* y = out.data().data();
  for (std::size_t n = 0; n < batch; ++n) {
    float* row = y + n * outs;
    for (std::size_t d = 0; d < in; ++d) axpy(x[n * in + d], w + d * outs, row, outs);
    for (std::size_t m = 0; m < outs; ++m) row[m] += b[m];
  }
  if (tracked) {
    tape.record("dense", {input, weight, bias}, out,
                [input, weight, bias, out, batch, in, outs]() mutable {
                  const float* dy = out.grad().data();
                  if (bias.requires_grad()) {
                    float* db = bias.grad_buffer().data();
                    for (std::size_t n = 0; n < batch; ++n) axpy(1.0f, dy + n * outs, db, outs);
                  }
                  if (weight.requires_grad()) {
                    const float* x = input.data().data();
                    float* dw = weight.grad_buffer().data();
                    for (std::size_t n = 0; n < batch; ++n) {
                      for (std::size_t d = 0; d < in; ++d) {
                        axpy(x[n * in + d], dy + n * outs, dw + d * outs, outs);
                      }
                    }
                  }
                  if (input.requires_grad()) {
                    const float* w = weight.data().data();
                    float* dx = input.grad_buffer().data();
                    for (std::size_t n = 0; n < batch; ++n) {
                      for (std::size_t d = 0; d < in; ++d) {
                        dx[n * in + d] += dot(dy + n * outs, w + d * outs, outs);
                      }
                    }
                  }
                });
  }
  return out;
}

Tensor activation(Tape& tape, const Tensor& input, Activation kind) {
  const bool tracked = tape.tracks({&input});
  Tensor out = make_output(input.shape(), tracked);
  const auto x = input.data();
  auto y = out.data();
  switch (kind) {
    case Activation::kRelu:
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
      if (tracked) {
        tape.record("relu", {input}, out, [input, out]() mutable {
          const auto x = input.data();
          const auto dy = out.grad();
          auto dx = input.grad_buffer();
          for (std::size_t i = 0; i < x.size(); ++i) {
            if (x[i] > 0.0f) dx[i] += dy[i];
          }
        });
      }
      break;
    case Activation::kSigmoid:
      for (std::size_t i = 0; i < x.size(); ++i) {
        // Split by sign so exp never overflows.
        if (x[i] >= 0.0f) {
          y[i] = 1.0f / (1.0f + std::exp(-x[i]));
        } else {
          const float e = std::exp(x[i]);
          y[i] = e / (1.0f + e);
        }
      }
      if (tracked) {
        tape.record("sigmoid", {input}, out, [input, out]() mutable {
          const auto y = out.data();
          const auto dy = out.grad();
          auto dx = input.grad_buffer();
          for (std::size_t i = 0; i < y.size(); ++i) dx[i] += dy[i] * y[i] * (1.0f - y[i]);
        });
      }
      break;
    case Activation::kSoftmaxRows: {
      require_rank(input, 2, "softmax_rows");
      const std::size_t rows = input.dim(0), cols = input.dim(1);
      for (std::size_t r = 0; r < rows; ++r) {
        const float* xr = x.data() + r * cols;
        float* yr = y.data() + r * cols;
        const float peak = *std::max_element(xr, xr + cols);
        float total = 0.0f;
        for (std::size_t c = 0; c < cols; ++c) {
          yr[c] = std::exp(xr[c] - peak);
          total += yr[c];
        }
        for (std::size_t c = 0; c < cols; ++c) yr[c] /= total;
      }
      if (tracked) {
        tape.record("softmax_rows", {input}, out, [input, out, rows, cols]() mutable {
          const float* y = out.data().data();
          const float* dy = out.grad().data();
          float* dx = input.grad_buffer().data();
          for (std::size_t r = 0; r < rows; ++r) {
            const float inner = dot(dy + r * cols, y + r * cols, cols);
            for (std::size_t c = 0; c < cols; ++c) {
              dx[r * cols + c] += y[r * cols + c] * (dy[r * cols + c] - inner);
            }
          }
        });
      }
      break;
    }
  }
  return out;
}

namespace {

const char* loss_name(LossKind kind) {
  switch (kind) {
    case LossKind::kBce: return "bce";
    case LossKind::kDice: return "dice";
    case LossKind::kSmoothL1: return "smooth_l1";
    case LossKind::kMse: return "mse";
    case LossKind::kCrossEntropy: return "cross_entropy";
  }
  return "loss";
}

constexpr float kProbClamp = 1e-7f;
constexpr float kLogFloor = 1e-12f;

}  // namespace

Tensor loss(Tape& tape, const Tensor& pred, const Tensor& target, LossKind kind) {
  require_same_shape(pred, target, loss_name(kind));
  if (kind == LossKind::kCrossEntropy) require_rank(pred, 2, "cross_entropy");
  const std::size_t batch = pred.dim(0);
  const std::size_t per_sample = pred.numel() / batch;
  const float inv_batch = 1.0f / static_cast<float>(batch);
  const auto p = pred.data();
  const auto t = target.data();

  float total = 0.0f;
  switch (kind) {
    case LossKind::kBce:
      for (std::size_t i = 0; i < p.size(); ++i) {
        const float q = std::clamp(p[i], kProbClamp, 1.0f - kProbClamp);
        total -= t[i] * std::log(q) + (1.0f - t[i]) * std::log(1.0f - q);
      }
      break;
    case LossKind::kDice:
      for (std::size_t n = 0; n < batch; ++n) {
        float inter = 0.0f, denom = 0.0f;
        for (std::size_t i = n * per_sample; i < (n + 1) * per_sample; ++i) {
          inter += p[i] * t[i];
          denom += p[i] + t[i];
        }
        total += 1.0f - (2.0f * inter + kDiceEpsilon) / (denom + kDiceEpsilon);
      }
      break;
    case LossKind::kSmoothL1:
      for (std::size_t i = 0; i < p.size(); ++i) {
        const float d = std::fabs(p[i] - t[i]);
        total += d < 1.0f ? 0.5f * d * d : d - 0.5f;
      }
      break;
    case LossKind::kMse:
      for (std::size_t i = 0; i < p.size(); ++i) {
        const float d = p[i] - t[i];
        total += d * d;
      }
      break;
    case LossKind::kCrossEntropy:
      for (std::size_t i = 0; i < p.size(); ++i) {
        if (t[i] != 0.0f) total -= t[i] * std::log(std::max(p[i], kLogFloor));
      }
      break;
  }

  const bool tracked = tape.tracks({&pred, &target});
  Tensor out = make_output({1}, tracked);
  out.data()[0] = std::max(0.0f, total * inv_batch);
  if (!tracked) return out;

  tape.record(loss_name(kind), {pred, target}, out,
              [pred, target, out, kind, batch, per_sample, inv_batch]() mutable {
                const float g = out.grad()[0] * inv_batch;
                const auto p = pred.data();
                const auto t = target.data();
                const bool want_p = pred.requires_grad();
                const bool want_t = target.requires_grad();
                std::span<float> dp = want_p ? pred.grad_buffer() : std::span<float>{};
                std::span<float> dt = want_t ? target.grad_buffer() : std::span<float>{};
                switch (kind) {
                  case LossKind::kBce:
                    for (std::size_t i = 0; i < p.size(); ++i) {
                      const float q = std::clamp(p[i], kProbClamp, 1.0f - kProbClamp);
                      if (want_p) dp[i] += g * (q - t[i]) / std::max(q * (1.0f - q), kLogFloor);
                      if (want_t) dt[i] += g * (std::log(1.0f - q) - std::log(q));
                    }
                    break;
                  case LossKind::kDice:
                    for (std::size_t n = 0; n < batch; ++n) {
                      float inter = 0.0f, denom = 0.0f;
                      const std::size_t lo = n * per_sample, hi = lo + per_sample;
                      for (std::size_t i = lo; i < hi; ++i) {
                        inter += p[i] * t[i];
                        denom += p[i] + t[i];
                      }
                      const float num = 2.0f * inter + kDiceEpsilon;
                      const float den = denom + kDiceEpsilon;
                      for (std::size_t i = lo; i < hi; ++i) {
                        if (want_p) dp[i] -= g * (2.0f * t[i] * den - num) / (den * den);
                        if (want_t) dt[i] -= g * (2.0f * p[i] * den - num) / (den * den);
                      }
                    }
                    break;
                  case LossKind::kSmoothL1:
                    for (std::size_t i = 0; i < p.size(); ++i) {
                      const float d = p[i] - t[i];
                      const float slope = std::fabs(d) < 1.0f ? d : (d > 0.0f ? 1.0f : -1.0f);
                      if (want_p) dp[i] += g * slope;
                      if (want_t) dt[i] -= g * slope;
                    }
                    break;
                  case LossKind::kMse:
                    for (std::size_t i = 0; i < p.size(); ++i) {
                      const float d = 2.0f * (p[i] - t[i]);
                      if (want_p) dp[i] += g * d;
                      if (want_t) dt[i] -= g * d;
                    }
                    break;
                  case LossKind::kCrossEntropy:
                    for (std::size_t i = 0; i < p.size(); ++i) {
                      const float q = std::max(p[i], kLogFloor);
                      if (want_p) dp[i] -= g * t[i] / q;
                      if (want_t) dt[i] -= g * std::log(q);
                    }
                    break;
                }
              });
  return out;
}

Tensor reshape(Tape& tape, const Tensor& input, Shape shape) {
  if (shape_numel(shape) != input.numel()) {
    throw DimensionError("reshape: cannot view " + shape_string(input.shape()) + " as " +
                         shape_string(shape));
  }
  const bool tracked = tape.tracks({&input});
  Tensor out(std::move(shape), std::vector<float>(input.data().begin(), input.data().end()));
  out.set_requires_grad(tracked);
  if (tracked) {
    tape.record("reshape", {input}, out, [input, out]() mutable {
      axpy(1.0f, out.grad().data(), input.grad_buffer().data(), out.numel());
    });
  }
  return out;
}

Tensor slice_cols(Tape& tape, const Tensor& input, std::size_t begin, std::size_t end) {
  require_rank(input, 2, "slice_cols");
  const std::size_t rows = input.dim(0), cols = input.dim(1);
  if (begin >= end || end > cols) throw DimensionError("slice_cols: invalid column range");
  const std::size_t width = end - begin;
  const bool tracked = tape.tracks({&input});
  Tensor out = make_output({rows, width}, tracked);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(input.data().data() + r * cols + begin, width, out.data().data() + r * width);
  }
  if (tracked) {
    tape.record("slice_cols", {input}, out, [input, out, rows, cols, begin, width]() mutable {
      const float* dy = out.grad().data();
      float* dx = input.grad_buffer().data();
      for (std::size_t r = 0; r < rows; ++r) axpy(1.0f, dy + r * width, dx + r * cols + begin, width);
    });
  }
  return out;
}

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  const bool tracked = tape.tracks({&a, &b});
  Tensor out = make_output(a.shape(), tracked);
  for (std::size_t i = 0; i < out.numel(); ++i) out.data()[i] = a.data()[i] + b.data()[i];
  if (tracked) {
    tape.record("add", {a, b}, out, [a, b, out]() mutable {
      if (a.requires_grad()) axpy(1.0f, out.grad().data(), a.grad_buffer().data(), out.numel());
      if (b.requires_grad()) axpy(1.0f, out.grad().data(), b.grad_buffer().data(), out.numel());
    });
  }
  return out;
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  const bool tracked = tape.tracks({&a, &b});
  Tensor out = make_output(a.shape(), tracked);
  for (std::size_t i = 0; i < out.numel(); ++i) out.data()[i] = a.data()[i] * b.data()[i];
  if (tracked) {
    tape.record("mul", {a, b}, out, [a, b, out]() mutable {
      const auto dy = out.grad();
      if (a.requires_grad()) {
        auto da = a.grad_buffer();
        for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i] * b.data()[i];
      }
      if (b.requires_grad()) {
        auto db = b.grad_buffer();
        for (std::size_t i = 0; i < dy.size(); ++i) db[i] += dy[i] * a.data()[i];
      }
    });
  }
  return out;
}

Tensor scale(Tape& tape, const Tensor& input, float factor) {
  const bool tracked = tape.tracks({&input});
  Tensor out = make_output(input.shape(), tracked);
  for (std::size_t i = 0; i < out.numel(); ++i) out.data()[i] = input.data()[i] * factor;
  if (tracked) {
    tape.record("scale", {input}, out, [input, out, factor]() mutable {
      axpy(factor, out.grad().data(), input.grad_buffer().data(), out.numel());
    });
  }
  return out;
}

Tensor sum(Tape& tape, const Tensor& input) {
  const bool tracked = tape.tracks({&input});
  Tensor out = make_output({1}, tracked);
  float total = 0.0f;
  for (float v : input.data()) total += v;
  out.data()[0] = total;
  if (tracked) {
    tape.record("sum", {input}, out, [input, out]() mutable {
      const float g = out.grad()[0];
      for (float& d : input.grad_buffer()) d += g;
    });
  }
  return out;
}

}  // namespace boneage
