#include "flowseg/reference.hpp"

#include <algorithm>
#include <cmath>

namespace flowseg::reference {

VectorField gradient(const ScalarField& u) {
  const GridDomain d = u.domain();
  VectorField g(d);
  for (std::size_t r = 0; r < d.height; ++r) {
    for (std::size_t c = 0; c < d.width; ++c) {
      g.x.at(r, c) = c + 1 < d.width ? u.at(r, c + 1) - u.at(r, c) : 0.0;
      g.y.at(r, c) = r + 1 < d.height ? u.at(r + 1, c) - u.at(r, c) : 0.0;
    }
  }
  return g;
}

ScalarField divergence(const VectorField& p) {
  const GridDomain d = p.domain();
  ScalarField out(d);
  for (std::size_t r = 0; r < d.height; ++r) {
    for (std::size_t c = 0; c < d.width; ++c) {
      const double dx = (c + 1 < d.width ? p.x.at(r, c) : 0.0) - (c > 0 ? p.x.at(r, c - 1) : 0.0);
      const double dy = (r + 1 < d.height ? p.y.at(r, c) : 0.0) - (r > 0 ? p.y.at(r - 1, c) : 0.0);
      out.at(r, c) = dx + dy;
    }
  }
  return out;
}

VectorField project_vector_capacity(const VectorField& p, const ScalarField& cap, TvMode mode) {
  VectorField out = p;
  for (std::size_t i = 0; i < cap.size(); ++i) {
    if (mode == TvMode::isotropic) {
      shrink_to_ball(out.x[i], out.y[i], cap[i]);
    } else {
      out.x[i] = std::clamp(p.x[i], -cap[i], cap[i]);
      out.y[i] = std::clamp(p.y[i], -cap[i], cap[i]);
    }
  }
  return out;
}

double tv_energy(const ScalarField& u, const ScalarField& c_edge, TvMode mode) {
  const VectorField g = reference::gradient(u);
  const GridDomain d = u.domain();
  double total = 0.0;
  for (std::size_t r = 0; r < d.height; ++r) {
    double row = 0.0;
    for (std::size_t c = 0; c < d.width; ++c) {
      const std::size_t i = d.index(r, c);
      row += c_edge[i] * magnitude(g.x[i], g.y[i], mode);
    }
    total += row;
  }
  return total;
}

void step(FlowState& s, const CapacityMaps& caps, const SolverConfig& cfg) {
  const double a = cfg.step_size;
  const double c = cfg.penalty;
  const std::size_t n = caps.domain().size();

  ScalarField g = reference::divergence(s.spatial);
  for (std::size_t i = 0; i < n; ++i) g[i] = g[i] - s.source[i] + s.sink[i] - s.lambda[i] / c;
  const VectorField dir = reference::gradient(g);
  VectorField moved = s.spatial;
  for (std::size_t i = 0; i < n; ++i) {
    moved.x[i] = s.spatial.x[i] + a * dir.x[i];
    moved.y[i] = s.spatial.y[i] + a * dir.y[i];
  }
  s.spatial = reference::project_vector_capacity(moved, caps.edge, cfg.tv_mode);

  const ScalarField div_p = reference::divergence(s.spatial);
  for (std::size_t i = 0; i < n; ++i) {
    s.source[i] =
        std::min(s.source[i] + a * (div_p[i] + s.sink[i] - s.source[i] - (s.lambda[i] - 1.0) / c), caps.source[i]);
  }
  for (std::size_t i = 0; i < n; ++i) {
    s.sink[i] = std::min(s.sink[i] + a * (-div_p[i] - s.sink[i] + s.source[i] + s.lambda[i] / c), caps.sink[i]);
  }
  for (std::size_t i = 0; i < n; ++i) s.lambda[i] -= a * (div_p[i] - s.source[i] + s.sink[i]);
}

SolverResult solve(const CapacityMaps& caps, const SolverConfig& cfg) {
  SolverResult result;
  const GridDomain d = caps.domain();
  FlowState& s = result.final_state;
  s = FlowState{ScalarField(d), ScalarField(d), VectorField(d), ScalarField(d, 0.5)};
  for (std::size_t i = 0; i < d.size(); ++i) {
    s.source[i] = std::min(caps.source[i], caps.sink[i]);
    s.sink[i] = s.source[i];
  }
  for (int it = 0; it < cfg.iterations; ++it) {
    reference::step(s, caps, cfg);
    const ScalarField div_p = reference::divergence(s.spatial);
    double rows = 0.0;
    for (std::size_t r = 0; r < d.height; ++r) {
      double acc = 0.0;
      for (std::size_t col = 0; col < d.width; ++col) {
        const std::size_t i = d.index(r, col);
        const double v = div_p[i] - s.source[i] + s.sink[i];
        acc += v * v;
      }
      rows += acc;
    }
    result.residual_norms.push_back(std::sqrt(rows));
  }
  if (cfg.clamp_lambda_final) {
    for (double& v : s.lambda.values()) v = std::clamp(v, 0.0, 1.0);
  }
  return result;
}

Tensor3 conv2d_forward(const Tensor3& in, std::span<const double> weight, std::span<const double> bias,
                       const ConvShape& s) {
  const std::size_t oh = conv_output_size(in.height, s);
  const std::size_t ow = conv_output_size(in.width, s);
  Tensor3 out(s.out_channels, oh, ow);
  const long k = static_cast<long>(s.kernel);
  for (std::size_t oc = 0; oc < s.out_channels; ++oc) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        double acc = bias[oc];
        for (std::size_t ic = 0; ic < s.in_channels; ++ic) {
          for (long ky = 0; ky < k; ++ky) {
            for (long kx = 0; kx < k; ++kx) {
              const long iy = static_cast<long>(oy * s.stride) + ky - static_cast<long>(s.padding);
              const long ix = static_cast<long>(ox * s.stride) + kx - static_cast<long>(s.padding);
              if (iy < 0 || ix < 0 || iy >= static_cast<long>(in.height) || ix >= static_cast<long>(in.width)) {
                continue;
              }
              acc += weight[((oc * s.in_channels + ic) * s.kernel + static_cast<std::size_t>(ky)) * s.kernel +
                            static_cast<std::size_t>(kx)] *
                     in.at(ic, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
            }
          }
        }
        out.at(oc, oy, ox) = acc;
      }
    }
  }
  return out;
}

Tensor3 deconv2d_forward(const Tensor3& in, std::span<const double> weight, std::span<const double> bias,
                         const ConvShape& s) {
  const std::size_t oh = deconv_output_size(in.height, s);
  const std::size_t ow = deconv_output_size(in.width, s);
  Tensor3 out(s.out_channels, oh, ow);
  // Gather form: out(oy) collects in(iy) with oy = iy*stride - pad + ky.
  const long k = static_cast<long>(s.kernel);
  const long st = static_cast<long>(s.stride);
  const long pad = static_cast<long>(s.padding);
  for (std::size_t oc = 0; oc < s.out_channels; ++oc) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        double acc = bias[oc];
        for (std::size_t ic = 0; ic < s.in_channels; ++ic) {
          for (long ky = 0; ky < k; ++ky) {
            const long ny = static_cast<long>(oy) + pad - ky;
            if (ny < 0 || ny % st != 0 || ny / st >= static_cast<long>(in.height)) continue;
            for (long kx = 0; kx < k; ++kx) {
              const long nx = static_cast<long>(ox) + pad - kx;
              if (nx < 0 || nx % st != 0 || nx / st >= static_cast<long>(in.width)) continue;
              acc += weight[((ic * s.out_channels + oc) * s.kernel + static_cast<std::size_t>(ky)) * s.kernel +
                            static_cast<std::size_t>(kx)] *
                     in.at(ic, static_cast<std::size_t>(ny / st), static_cast<std::size_t>(nx / st));
            }
          }
        }
        out.at(oc, oy, ox) = acc;
      }
    }
  }
  return out;
}

}  // namespace flowseg::reference
