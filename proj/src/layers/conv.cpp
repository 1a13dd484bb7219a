// Copyright 2026 The lipscert Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "layers/conv.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "layers/affine.hpp"

namespace lipscert {

namespace {

struct ImageDims {
  std::size_t batch, height, width, channels;
};

ImageDims image_dims(const Tensor& x, const char* what) {
  if (x.rank() == 3) return {1, x.dim(0), x.dim(1), x.dim(2)};
  if (x.rank() == 4) return {x.dim(0), x.dim(1), x.dim(2), x.dim(3)};
  throw DimensionError(std::string(what) + ": expected [H,W,C] or [B,H,W,C], got " +
                       shape_str(x.shape()));
}

std::size_t kernel_side(const Tensor& kernel, std::size_t channels, const char* what) {
  require_rank(kernel, 2, what);
  if (kernel.dim(0) != channels) {
    throw DimensionError(std::string(what) + ": kernel " + shape_str(kernel.shape()) +
                         " does not match " + std::to_string(channels) + " channels");
  }
  const auto k = static_cast<std::size_t>(std::lround(std::sqrt(kernel.dim(1))));
  if (k * k != kernel.dim(1) || k % 2 == 0) {
    throw DimensionError(std::string(what) + ": kernel taps must form an odd square");
  }
  return k;
}

// [C, T] → [T, C] so the channel loop is contiguous.
std::vector<double> tap_major(const Tensor& kernel) {
  const std::size_t c = kernel.dim(0), t = kernel.dim(1);
  std::vector<double> out(c * t);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t tap = 0; tap < t; ++tap) out[tap * c + ch] = kernel(ch, tap);
  return out;
}

}  // namespace

Tensor depthwise_conv(const Tensor& x, const Tensor& kernel, const Tensor& bias) {
  const ImageDims d = image_dims(x, "depthwise_conv");
  const std::size_t k = kernel_side(kernel, d.channels, "depthwise_conv");
  if (!bias.empty() && bias.size() != d.channels) {
    throw DimensionError("depthwise_conv: bias length does not match channels");
  }
  const std::vector<double> kt = tap_major(kernel);
  const long pad = static_cast<long>(k / 2);
  const std::size_t c = d.channels;
  Tensor out(x.shape());
  for (std::size_t b = 0; b < d.batch; ++b) {
    const double* xb = x.data() + b * d.height * d.width * c;
    double* ob = out.data() + b * d.height * d.width * c;
    for (std::size_t y = 0; y < d.height; ++y)
      for (std::size_t xx = 0; xx < d.width; ++xx) {
        double* o = ob + (y * d.width + xx) * c;
        if (!bias.empty())
          for (std::size_t ch = 0; ch < c; ++ch) o[ch] = bias[ch];
        for (std::size_t ky = 0; ky < k; ++ky) {
          const long sy = static_cast<long>(y) + static_cast<long>(ky) - pad;
          if (sy < 0 || sy >= static_cast<long>(d.height)) continue;
          for (std::size_t kx = 0; kx < k; ++kx) {
            const long sx = static_cast<long>(xx) + static_cast<long>(kx) - pad;
            if (sx < 0 || sx >= static_cast<long>(d.width)) continue;
            const double* src = xb + (static_cast<std::size_t>(sy) * d.width + sx) * c;
            const double* kw = kt.data() + (ky * k + kx) * c;
            for (std::size_t ch = 0; ch < c; ++ch) o[ch] += kw[ch] * src[ch];
          }
        }
      }
  }
  return out;
}

DepthwiseGrads depthwise_conv_vjp(const Tensor& x, const Tensor& kernel, bool has_bias,
                                  const Tensor& g) {
  const ImageDims d = image_dims(x, "depthwise_conv_vjp");
  const std::size_t k = kernel_side(kernel, d.channels, "depthwise_conv_vjp");
  require_same_shape(x, g, "depthwise_conv_vjp");
  const std::vector<double> kt = tap_major(kernel);
  const long pad = static_cast<long>(k / 2);
  const std::size_t c = d.channels;
  std::vector<double> dkt(kt.size(), 0.0);
  DepthwiseGrads out{Tensor(x.shape()), Tensor(kernel.shape()), Tensor()};
  if (has_bias) out.dbias = Tensor({c});
  for (std::size_t b = 0; b < d.batch; ++b) {
    const std::size_t off = b * d.height * d.width * c;
    const double* xb = x.data() + off;
    const double* gb = g.data() + off;
    double* dxb = out.dx.data() + off;
    for (std::size_t y = 0; y < d.height; ++y)
      for (std::size_t xx = 0; xx < d.width; ++xx) {
        const double* gr = gb + (y * d.width + xx) * c;
        if (has_bias)
          for (std::size_t ch = 0; ch < c; ++ch) out.dbias[ch] += gr[ch];
        for (std::size_t ky = 0; ky < k; ++ky) {
          const long sy = static_cast<long>(y) + static_cast<long>(ky) - pad;
          if (sy < 0 || sy >= static_cast<long>(d.height)) continue;
          for (std::size_t kx = 0; kx < k; ++kx) {
            const long sx = static_cast<long>(xx) + static_cast<long>(kx) - pad;
            if (sx < 0 || sx >= static_cast<long>(d.width)) continue;
            const std::size_t src = (static_cast<std::size_t>(sy) * d.width + sx) * c;
            const std::size_t tap = (ky * k + kx) * c;
            for (std::size_t ch = 0; ch < c; ++ch) {
              dxb[src + ch] += kt[tap + ch] * gr[ch];
              dkt[tap + ch] += xb[src + ch] * gr[ch];
            }
          }
        }
      }
  }
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t tap = 0; tap < k * k; ++tap) out.dkernel(ch, tap) = dkt[tap * c + ch];
  return out;
}

double depthwise_inf_norm(const Tensor& kernel, std::size_t height, std::size_t width) {
  const std::size_t k = kernel_side(kernel, kernel.dim(0), "depthwise_inf_norm");
  const long pad = static_cast<long>(k / 2);
  double best = 0.0;
  for (std::size_t ch = 0; ch < kernel.dim(0); ++ch)
    for (std::size_t y = 0; y < height; ++y)
      for (std::size_t x = 0; x < width; ++x) {
        double s = 0.0;
        for (std::size_t ky = 0; ky < k; ++ky) {
          const long sy = static_cast<long>(y) + static_cast<long>(ky) - pad;
          if (sy < 0 || sy >= static_cast<long>(height)) continue;
          for (std::size_t kx = 0; kx < k; ++kx) {
            const long sx = static_cast<long>(x) + static_cast<long>(kx) - pad;
            if (sx < 0 || sx >= static_cast<long>(width)) continue;
            s += std::abs(kernel(ch, ky * k + kx));
          }
        }
        best = std::max(best, s);
      }
  return best;
}

Tensor patchify(const Tensor& x, std::size_t k) {
  const ImageDims d = image_dims(x, "patchify");
  if (k == 0 || d.height % k != 0 || d.width % k != 0) {
    throw DimensionError("patchify: image " + shape_str(x.shape()) + " not divisible by patch " +
                         std::to_string(k));
  }
  const std::size_t ph = d.height / k, pw = d.width / k, c = d.channels;
  Tensor out({d.batch, ph * pw, k * k * c});
  double* o = out.data();
  for (std::size_t b = 0; b < d.batch; ++b)
    for (std::size_t py = 0; py < ph; ++py)
      for (std::size_t px = 0; px < pw; ++px)
        for (std::size_t ky = 0; ky < k; ++ky)
          for (std::size_t kx = 0; kx < k; ++kx) {
            const double* src =
                x.data() + ((b * d.height + py * k + ky) * d.width + px * k + kx) * c;
            std::copy(src, src + c, o);
            o += c;
          }
  return out;
}

Tensor unpatchify(const Tensor& patches, const Shape& image_shape, std::size_t k) {
  Tensor out(image_shape);
  const ImageDims d = image_dims(out, "unpatchify");
  const std::size_t ph = d.height / k, pw = d.width / k, c = d.channels;
  if (patches.size() != out.size()) throw DimensionError("unpatchify: size mismatch");
  const double* src = patches.data();
  for (std::size_t b = 0; b < d.batch; ++b)
    for (std::size_t py = 0; py < ph; ++py)
      for (std::size_t px = 0; px < pw; ++px)
        for (std::size_t ky = 0; ky < k; ++ky)
          for (std::size_t kx = 0; kx < k; ++kx) {
            double* dst = out.data() + ((b * d.height + py * k + ky) * d.width + px * k + kx) * c;
            std::copy(src, src + c, dst);
            src += c;
          }
  return out;
}

Tensor patch_conv(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t k) {
  const ImageDims d = image_dims(x, "patch_conv");
  Tensor y = affine(patchify(x, k), weight, bias);
  if (x.rank() == 3) {
    y.reshape({d.height / k, d.width / k, weight.dim(1)});
  } else {
    y.reshape({d.batch, d.height / k, d.width / k, weight.dim(1)});
  }
  return y;
}

PatchConvGrads patch_conv_vjp(const Tensor& x, const Tensor& weight, bool has_bias,
                              std::size_t k, const Tensor& g) {
  const ImageDims d = image_dims(x, "patch_conv_vjp");
  const Tensor p = patchify(x, k);
  const Tensor gp = g.reshaped({d.batch, p.dim(1), weight.dim(1)});
  AffineGrads a = affine_vjp(p, weight, has_bias, gp);
  return PatchConvGrads{unpatchify(a.dx, x.shape(), k), std::move(a.dw), std::move(a.db)};
}

void ConvBlockParams::validate() const {
  require_rank(dw_kernel, 2, "conv_block kernel");
  require_rank(pw_weight, 2, "conv_block pointwise");
  if (pw_weight.dim(0) != dw_kernel.dim(0)) {
    throw DimensionError("conv_block: pointwise input channels " +
                         std::to_string(pw_weight.dim(0)) + " do not match depthwise channels " +
                         std::to_string(dw_kernel.dim(0)));
  }
  if (!dw_bias.empty() && dw_bias.size() != dw_kernel.dim(0))
    throw DimensionError("conv_block: depthwise bias length");
  if (!pw_bias.empty() && pw_bias.size() != pw_weight.dim(1))
    throw DimensionError("conv_block: pointwise bias length");
}

Tensor conv_block(const Tensor& x, const ConvBlockParams& p, ConvBlockCache* cache) {
  p.validate();
  Tensor mid = depthwise_conv(x, p.dw_kernel, p.dw_bias);
  Tensor y = affine(mid, p.pw_weight, p.pw_bias);
  if (cache) cache->mid = std::move(mid);
  return y;
}

ConvBlockGrads conv_block_vjp(const Tensor& x, const ConvBlockParams& p,
                              const ConvBlockCache& cache, const Tensor& g) {
  AffineGrads pw = affine_vjp(cache.mid, p.pw_weight, !p.pw_bias.empty(), g);
  DepthwiseGrads dw = depthwise_conv_vjp(x, p.dw_kernel, !p.dw_bias.empty(), pw.dx);
  return ConvBlockGrads{std::move(dw.dx), std::move(dw.dkernel), std::move(dw.dbias),
                        std::move(pw.dw), std::move(pw.db)};
}

}  // namespace lipscert
