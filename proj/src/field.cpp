#include "flowseg/field.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace flowseg {

GridDomain::GridDomain(std::size_t h, std::size_t w) : height(h), width(w) {
  if (h == 0 || w == 0) {
    throw std::invalid_argument("grid dimensions must be positive, got " + std::to_string(h) + "x" +
                                std::to_string(w));
  }
}

std::string to_string(const GridDomain& domain) {
  return std::to_string(domain.height) + "x" + std::to_string(domain.width);
}

void require_same_domain(const GridDomain& a, const GridDomain& b, const char* what) {
  if (a != b) {
    throw DomainError(std::string(what) + ": domain mismatch (" + to_string(a) + " vs " + to_string(b) +
                      ")");
  }
}

ScalarField::ScalarField(GridDomain domain, double fill) : domain_(domain), values_(domain.size(), fill) {}

ScalarField::ScalarField(GridDomain domain, std::vector<double> values)
    : domain_(domain), values_(std::move(values)) {
  if (values_.size() != domain_.size()) {
    throw std::invalid_argument("field has " + std::to_string(values_.size()) + " values, domain " +
                                to_string(domain_) + " needs " + std::to_string(domain_.size()));
  }
  if (!all_finite()) throw std::invalid_argument("field contains non-finite values");
}

bool ScalarField::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

VectorField::VectorField(ScalarField xs, ScalarField ys) : x(std::move(xs)), y(std::move(ys)) {
  require_same_domain(x.domain(), y.domain(), "VectorField");
}

TvMode parse_tv_mode(const std::string& name) {
  if (name == "isotropic") return TvMode::isotropic;
  if (name == "anisotropic") return TvMode::anisotropic;
  throw std::invalid_argument("unknown tv mode '" + name + "'");
}

std::string to_string(TvMode mode) { return mode == TvMode::isotropic ? "isotropic" : "anisotropic"; }

double magnitude(double x, double y, TvMode mode) {
  return mode == TvMode::isotropic ? std::sqrt(x * x + y * y) : std::abs(x) + std::abs(y);
}

double constraint_magnitude(double x, double y, TvMode mode) {
  return mode == TvMode::isotropic ? std::sqrt(x * x + y * y) : std::max(std::abs(x), std::abs(y));
}

void shrink_to_ball(double& x, double& y, double cap) {
  const double m = std::sqrt(x * x + y * y);
  if (!(m > cap)) return;
  const double s = cap / m;
  x *= s;
  y *= s;
  while (std::sqrt(x * x + y * y) > cap) {
    x = std::nextafter(x, 0.0);
    y = std::nextafter(y, 0.0);
  }
}

ScalarField magnitude(const VectorField& v, TvMode mode) {
  ScalarField out(v.domain());
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(out.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = magnitude(v.x[i], v.y[i], mode);
  return out;
}

VectorField gradient(const ScalarField& u) {
  const GridDomain d = u.domain();
  VectorField g(d);
  const std::ptrdiff_t rows = static_cast<std::ptrdiff_t>(d.height);
  const std::size_t w = d.width;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    const std::size_t row = static_cast<std::size_t>(r);
    const double* cur = u.data() + row * w;
    double* gx = g.x.data() + row * w;
    double* gy = g.y.data() + row * w;
    for (std::size_t c = 0; c + 1 < w; ++c) gx[c] = cur[c + 1] - cur[c];
    gx[w - 1] = 0.0;
    if (row + 1 < d.height) {
      const double* next = cur + w;
      for (std::size_t c = 0; c < w; ++c) gy[c] = next[c] - cur[c];
    } else {
      for (std::size_t c = 0; c < w; ++c) gy[c] = 0.0;
    }
  }
  return g;
}

ScalarField divergence(const VectorField& p) {
  const GridDomain d = p.domain();
  ScalarField out(d);
  const std::ptrdiff_t rows = static_cast<std::ptrdiff_t>(d.height);
  const std::size_t w = d.width;
  const std::size_t h = d.height;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    const std::size_t row = static_cast<std::size_t>(r);
    const double* px = p.x.data() + row * w;
    const double* py = p.y.data() + row * w;
    const double* py_up = row > 0 ? py - w : nullptr;
    double* o = out.data() + row * w;
    for (std::size_t c = 0; c < w; ++c) {
      const double dx = (c + 1 < w ? px[c] : 0.0) - (c > 0 ? px[c - 1] : 0.0);
      const double dy = (row + 1 < h ? py[c] : 0.0) - (py_up ? py_up[c] : 0.0);
      o[c] = dx + dy;
    }
  }
  return out;
}

ScalarField project_scalar_capacity(const ScalarField& f, const ScalarField& cap) {
  require_same_domain(f.domain(), cap.domain(), "project_scalar_capacity");
  ScalarField out(f.domain());
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(f.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = std::min(f[i], cap[i]);
  return out;
}

VectorField project_vector_capacity(const VectorField& p, const ScalarField& cap, TvMode mode) {
  require_same_domain(p.domain(), cap.domain(), "project_vector_capacity");
  VectorField out(p.domain());
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(cap.size());
  if (mode == TvMode::isotropic) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      double x = p.x[i], y = p.y[i];
      shrink_to_ball(x, y, cap[i]);
      out.x[i] = x;
      out.y[i] = y;
    }
  } else {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      out.x[i] = std::clamp(p.x[i], -cap[i], cap[i]);
      out.y[i] = std::clamp(p.y[i], -cap[i], cap[i]);
    }
  }
  return out;
}

namespace {

// Sums f(i) over each row into a partial, then adds the partials in row order.
template <typename RowTerm>
double row_ordered_sum(const GridDomain& d, RowTerm term) {
  std::vector<double> partial(d.height, 0.0);
  const std::ptrdiff_t rows = static_cast<std::ptrdiff_t>(d.height);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    const std::size_t base = static_cast<std::size_t>(r) * d.width;
    double s = 0.0;
    for (std::size_t c = 0; c < d.width; ++c) s += term(base + c);
    partial[static_cast<std::size_t>(r)] = s;
  }
  double total = 0.0;
  for (double s : partial) total += s;
  return total;
}

}  // namespace

double tv_energy(const ScalarField& u, const ScalarField& c_edge, TvMode mode) {
  require_same_domain(u.domain(), c_edge.domain(), "tv_energy");
  const VectorField g = gradient(u);
  return row_ordered_sum(u.domain(),
                         [&](std::size_t i) { return c_edge[i] * magnitude(g.x[i], g.y[i], mode); });
}

double inner(const ScalarField& a, const ScalarField& b) {
  require_same_domain(a.domain(), b.domain(), "inner");
  return row_ordered_sum(a.domain(), [&](std::size_t i) { return a[i] * b[i]; });
}

double inner(const VectorField& a, const VectorField& b) { return inner(a.x, b.x) + inner(a.y, b.y); }

double l2_norm(const ScalarField& a) { return std::sqrt(inner(a, a)); }

double sum(const ScalarField& a) {
  return row_ordered_sum(a.domain(), [&](std::size_t i) { return a[i]; });
}

}  // namespace flowseg
