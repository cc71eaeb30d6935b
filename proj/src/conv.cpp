#include "flowseg/conv.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace flowseg {

namespace {

using Index = std::ptrdiff_t;

// Indices o in [lo, hi) with 0 <= o * stride + offset < limit.
struct Range {
  Index lo = 0;
  Index hi = 0;
};

Range valid_range(Index count, Index limit, Index stride, Index offset) {
  Range r;
  r.lo = offset >= 0 ? 0 : (-offset + stride - 1) / stride;
  const Index top = limit - 1 - offset;
  r.hi = top < 0 ? 0 : std::min(count, top / stride + 1);
  if (r.hi < r.lo) r.hi = r.lo;
  return r;
}

void check_conv_args(const Tensor3& in, std::span<const double> weight, std::span<const double> bias,
                     const ConvShape& s, const char* what) {
  if (in.channels != s.in_channels) {
    throw std::invalid_argument(std::string(what) + ": expected " + std::to_string(s.in_channels) +
                                " input channels, got " + std::to_string(in.channels));
  }
  if (weight.size() != s.in_channels * s.out_channels * s.kernel * s.kernel || bias.size() != s.out_channels) {
    throw std::invalid_argument(std::string(what) + ": parameter size mismatch");
  }
}

}  // namespace

std::size_t conv_output_size(std::size_t in, const ConvShape& s) {
  return (in + 2 * s.padding - s.kernel) / s.stride + 1;
}

std::size_t deconv_output_size(std::size_t in, const ConvShape& s) {
  return (in - 1) * s.stride + s.kernel + s.output_padding - 2 * s.padding;
}

Tensor3 conv2d_forward(const Tensor3& in, std::span<const double> weight, std::span<const double> bias,
                       const ConvShape& s) {
  check_conv_args(in, weight, bias, s, "conv2d_forward");
  const std::size_t oh = conv_output_size(in.height, s);
  const std::size_t ow = conv_output_size(in.width, s);
  Tensor3 out(s.out_channels, oh, ow);
  const Index k = static_cast<Index>(s.kernel);
  const Index st = static_cast<Index>(s.stride);
  const Index pad = static_cast<Index>(s.padding);
  const Index iw = static_cast<Index>(in.width);

#pragma omp parallel for schedule(static)
  for (Index oc = 0; oc < static_cast<Index>(s.out_channels); ++oc) {
    double* o = out.channel(static_cast<std::size_t>(oc));
    std::fill(o, o + out.plane(), bias[static_cast<std::size_t>(oc)]);
    for (std::size_t ic = 0; ic < s.in_channels; ++ic) {
      const double* src = in.channel(ic);
      const double* wk = weight.data() + (static_cast<std::size_t>(oc) * s.in_channels + ic) * s.kernel * s.kernel;
      for (Index ky = 0; ky < k; ++ky) {
        const Range ry = valid_range(static_cast<Index>(oh), static_cast<Index>(in.height), st, ky - pad);
        for (Index kx = 0; kx < k; ++kx) {
          const double w = wk[ky * k + kx];
          const Range rx = valid_range(static_cast<Index>(ow), iw, st, kx - pad);
          for (Index oy = ry.lo; oy < ry.hi; ++oy) {
            const double* srow = src + (oy * st + ky - pad) * iw;
            double* orow = o + oy * static_cast<Index>(ow);
            const Index dx = kx - pad;
            if (st == 1) {
              for (Index ox = rx.lo; ox < rx.hi; ++ox) orow[ox] += w * srow[ox + dx];
            } else {
              for (Index ox = rx.lo; ox < rx.hi; ++ox) orow[ox] += w * srow[ox * st + dx];
            }
          }
        }
      }
    }
  }
  return out;
}

void conv2d_backward(const Tensor3& in, const Tensor3& grad_out, std::span<const double> weight, const ConvShape& s,
                     Tensor3* grad_in, std::span<double> grad_weight, std::span<double> grad_bias) {
  const Index k = static_cast<Index>(s.kernel);
  const Index st = static_cast<Index>(s.stride);
  const Index pad = static_cast<Index>(s.padding);
  const Index iw = static_cast<Index>(in.width);
  const Index oh = static_cast<Index>(grad_out.height);
  const Index ow = static_cast<Index>(grad_out.width);
  const std::size_t kk = s.kernel * s.kernel;

#pragma omp parallel for schedule(static)
  for (Index oc = 0; oc < static_cast<Index>(s.out_channels); ++oc) {
    const double* g = grad_out.channel(static_cast<std::size_t>(oc));
    double bsum = 0.0;
    for (std::size_t i = 0; i < grad_out.plane(); ++i) bsum += g[i];
    grad_bias[static_cast<std::size_t>(oc)] += bsum;
    for (std::size_t ic = 0; ic < s.in_channels; ++ic) {
      const double* src = in.channel(ic);
      double* gw = grad_weight.data() + (static_cast<std::size_t>(oc) * s.in_channels + ic) * kk;
      for (Index ky = 0; ky < k; ++ky) {
        const Range ry = valid_range(oh, static_cast<Index>(in.height), st, ky - pad);
        for (Index kx = 0; kx < k; ++kx) {
          const Range rx = valid_range(ow, iw, st, kx - pad);
          double acc = 0.0;
          for (Index oy = ry.lo; oy < ry.hi; ++oy) {
            const double* srow = src + (oy * st + ky - pad) * iw;
            const double* grow = g + oy * ow;
            for (Index ox = rx.lo; ox < rx.hi; ++ox) acc += grow[ox] * srow[ox * st + kx - pad];
          }
          gw[ky * k + kx] += acc;
        }
      }
    }
  }

  if (!grad_in) return;
#pragma omp parallel for schedule(static)
  for (Index ic = 0; ic < static_cast<Index>(s.in_channels); ++ic) {
    double* gi = grad_in->channel(static_cast<std::size_t>(ic));
    for (std::size_t oc = 0; oc < s.out_channels; ++oc) {
      const double* g = grad_out.channel(oc);
      const double* wk = weight.data() + (oc * s.in_channels + static_cast<std::size_t>(ic)) * kk;
      for (Index ky = 0; ky < k; ++ky) {
        const Range ry = valid_range(oh, static_cast<Index>(in.height), st, ky - pad);
        for (Index kx = 0; kx < k; ++kx) {
          const double w = wk[ky * k + kx];
          const Range rx = valid_range(ow, iw, st, kx - pad);
          for (Index oy = ry.lo; oy < ry.hi; ++oy) {
            double* irow = gi + (oy * st + ky - pad) * iw;
            const double* grow = g + oy * ow;
            for (Index ox = rx.lo; ox < rx.hi; ++ox) irow[ox * st + kx - pad] += w * grow[ox];
          }
        }
      }
    }
  }
}

Tensor3 deconv2d_forward(const Tensor3& in, std::span<const double> weight, std::span<const double> bias,
                         const ConvShape& s) {
  check_conv_args(in, weight, bias, s, "deconv2d_forward");
  const std::size_t oh = deconv_output_size(in.height, s);
  const std::size_t ow = deconv_output_size(in.width, s);
  Tensor3 out(s.out_channels, oh, ow);
  const Index k = static_cast<Index>(s.kernel);
  const Index st = static_cast<Index>(s.stride);
  const Index pad = static_cast<Index>(s.padding);
  const Index ih = static_cast<Index>(in.height);
  const Index iw = static_cast<Index>(in.width);
  const std::size_t kk = s.kernel * s.kernel;

#pragma omp parallel for schedule(static)
  for (Index oc = 0; oc < static_cast<Index>(s.out_channels); ++oc) {
    double* o = out.channel(static_cast<std::size_t>(oc));
    std::fill(o, o + out.plane(), bias[static_cast<std::size_t>(oc)]);
    for (std::size_t ic = 0; ic < s.in_channels; ++ic) {
      const double* src = in.channel(ic);
      const double* wk = weight.data() + (ic * s.out_channels + static_cast<std::size_t>(oc)) * kk;
      for (Index ky = 0; ky < k; ++ky) {
        const Range ry = valid_range(ih, static_cast<Index>(oh), st, ky - pad);
        for (Index kx = 0; kx < k; ++kx) {
          const double w = wk[ky * k + kx];
          const Range rx = valid_range(iw, static_cast<Index>(ow), st, kx - pad);
          for (Index iy = ry.lo; iy < ry.hi; ++iy) {
            double* orow = o + (iy * st + ky - pad) * static_cast<Index>(ow);
            const double* srow = src + iy * iw;
            for (Index ix = rx.lo; ix < rx.hi; ++ix) orow[ix * st + kx - pad] += w * srow[ix];
          }
        }
      }
    }
  }
  return out;
}

void deconv2d_backward(const Tensor3& in, const Tensor3& grad_out, std::span<const double> weight,
                       const ConvShape& s, Tensor3* grad_in, std::span<double> grad_weight,
                       std::span<double> grad_bias) {
  const Index k = static_cast<Index>(s.kernel);
  const Index st = static_cast<Index>(s.stride);
  const Index pad = static_cast<Index>(s.padding);
  const Index ih = static_cast<Index>(in.height);
  const Index iw = static_cast<Index>(in.width);
  const Index oh = static_cast<Index>(grad_out.height);
  const Index ow = static_cast<Index>(grad_out.width);
  const std::size_t kk = s.kernel * s.kernel;

  for (std::size_t oc = 0; oc < s.out_channels; ++oc) {
    const double* g = grad_out.channel(oc);
    double bsum = 0.0;
    for (std::size_t i = 0; i < grad_out.plane(); ++i) bsum += g[i];
    grad_bias[oc] += bsum;
  }

  // Each input channel owns its slice of the weight gradient and its plane
  // of the input gradient.
#pragma omp parallel for schedule(static)
  for (Index ic = 0; ic < static_cast<Index>(s.in_channels); ++ic) {
    const double* src = in.channel(static_cast<std::size_t>(ic));
    double* gi = grad_in ? grad_in->channel(static_cast<std::size_t>(ic)) : nullptr;
    for (std::size_t oc = 0; oc < s.out_channels; ++oc) {
      const double* g = grad_out.channel(oc);
      const std::size_t base = (static_cast<std::size_t>(ic) * s.out_channels + oc) * kk;
      const double* wk = weight.data() + base;
      double* gw = grad_weight.data() + base;
      for (Index ky = 0; ky < k; ++ky) {
        const Range ry = valid_range(ih, oh, st, ky - pad);
        for (Index kx = 0; kx < k; ++kx) {
          const double w = wk[ky * k + kx];
          const Range rx = valid_range(iw, ow, st, kx - pad);
          double acc = 0.0;
          for (Index iy = ry.lo; iy < ry.hi; ++iy) {
            const double* grow = g + (iy * st + ky - pad) * ow;
            const Index dx = kx - pad;
            const double* srow = src + iy * iw;
            if (gi) {
              double* irow = gi + iy * iw;
              for (Index ix = rx.lo; ix < rx.hi; ++ix) {
                acc += srow[ix] * grow[ix * st + dx];
                irow[ix] += w * grow[ix * st + dx];
              }
            } else {
              for (Index ix = rx.lo; ix < rx.hi; ++ix) acc += srow[ix] * grow[ix * st + dx];
            }
          }
          gw[ky * k + kx] += acc;
        }
      }
    }
  }
}

}  // namespace flowseg
