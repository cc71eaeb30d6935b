#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace flowseg {

/// Raised when two fields that must share a grid do not.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Pixel grid with unit spacing in both axes.
struct GridDomain {
  std::size_t height = 1;
  std::size_t width = 1;

  GridDomain() = default;
  GridDomain(std::size_t h, std::size_t w);

  std::size_t size() const { return height * width; }
  std::size_t index(std::size_t row, std::size_t col) const { return row * width + col; }

  friend bool operator==(const GridDomain&, const GridDomain&) = default;
};

std::string to_string(const GridDomain& domain);
void require_same_domain(const GridDomain& a, const GridDomain& b, const char* what);

/// Real-valued field over a grid, row-major, double precision.
class ScalarField {
 public:
  ScalarField() = default;
  explicit ScalarField(GridDomain domain, double fill = 0.0);
  /// Throws std::invalid_argument on length mismatch or non-finite values.
  ScalarField(GridDomain domain, std::vector<double> values);

  const GridDomain& domain() const { return domain_; }
  std::size_t size() const { return values_.size(); }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& at(std::size_t row, std::size_t col) { return values_[domain_.index(row, col)]; }
  double at(std::size_t row, std::size_t col) const { return values_[domain_.index(row, col)]; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }

  bool all_finite() const;

  friend bool operator==(const ScalarField&, const ScalarField&) = default;

 private:
  GridDomain domain_;
  std::vector<double> values_;
};

/// Two collocated components; x runs along columns, y along rows.
struct VectorField {
  ScalarField x;
  ScalarField y;

  VectorField() = default;
  explicit VectorField(GridDomain domain) : x(domain), y(domain) {}
  VectorField(ScalarField xs, ScalarField ys);

  const GridDomain& domain() const { return x.domain(); }

  friend bool operator==(const VectorField&, const VectorField&) = default;
};

enum class TvMode { isotropic, anisotropic };

TvMode parse_tv_mode(const std::string& name);
std::string to_string(TvMode mode);

/// |(x, y)| under the given mode: Euclidean or L1.
double magnitude(double x, double y, TvMode mode);
ScalarField magnitude(const VectorField& v, TvMode mode);

/// The quantity the edge capacity bounds: Euclidean magnitude, or the larger
/// component under the anisotropic per-component box.
double constraint_magnitude(double x, double y, TvMode mode);

/// Rescales (x, y) onto the disc of radius cap when it lies outside. The
/// result's Euclidean magnitude never exceeds cap, so a second call is a no-op.
void shrink_to_ball(double& x, double& y, double cap);

/// Forward differences with zero difference across the last column/row.
VectorField gradient(const ScalarField& u);

/// Backward differences; the exact negative adjoint of gradient().
ScalarField divergence(const VectorField& p);

/// Pointwise min(f, cap). No lower bound.
ScalarField project_scalar_capacity(const ScalarField& f, const ScalarField& cap);

/// Isotropic: shrink vectors longer than cap back onto the ball.
/// Anisotropic: clamp each component into [-cap, cap].
VectorField project_vector_capacity(const VectorField& p, const ScalarField& cap, TvMode mode);

/// sum_x c_edge(x) * |grad u(x)|.
double tv_energy(const ScalarField& u, const ScalarField& c_edge, TvMode mode);

// Reductions below sum each row first and then the row totals in order, so
// results do not depend on how rows are split across threads.
double inner(const ScalarField& a, const ScalarField& b);
double inner(const VectorField& a, const VectorField& b);
double l2_norm(const ScalarField& a);
double sum(const ScalarField& a);

}  // namespace flowseg
