#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "flowseg/field.hpp"
#include "flowseg/reference.hpp"
#include "oracles.hpp"

using namespace flowseg;

namespace {

ScalarField row(std::vector<double> v) {
  const GridDomain d(1, v.size());
  return ScalarField(d, std::move(v));
}

ScalarField vertical_split_4x4() {
  ScalarField u(GridDomain(4, 4));
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 2; c < 4; ++c) u.at(r, c) = 1.0;
  return u;
}

}  // namespace

TEST(GridDomain, RejectsZeroSize) {
  EXPECT_THROW(GridDomain(0, 3), std::invalid_argument);
  EXPECT_THROW(GridDomain(3, 0), std::invalid_argument);
}

TEST(ScalarField, RejectsBadLengthAndNonFinite) {
  EXPECT_THROW(ScalarField(GridDomain(2, 2), std::vector<double>{1, 2, 3}), std::invalid_argument);
  EXPECT_THROW(ScalarField(GridDomain(1, 2), std::vector<double>{1, NAN}), std::invalid_argument);
  EXPECT_THROW(ScalarField(GridDomain(1, 2), std::vector<double>{INFINITY, 0}), std::invalid_argument);
}

TEST(Gradient, RowExample) {
  const VectorField g = gradient(row({0, 1, 3}));
  EXPECT_EQ(g.x, row({1, 2, 0}));
  EXPECT_EQ(g.y, row({0, 0, 0}));
}

TEST(Gradient, ConstantIsZero) {
  const VectorField g = gradient(ScalarField(GridDomain(5, 7), 3.25));
  EXPECT_EQ(g, VectorField(GridDomain(5, 7)));
}

TEST(Gradient, ColumnsAndRows) {
  ScalarField u(GridDomain(3, 2), {1, 2, 4, 8, 16, 32});
  const VectorField g = gradient(u);
  EXPECT_EQ(g.x, ScalarField(GridDomain(3, 2), {1, 0, 4, 0, 16, 0}));
  EXPECT_EQ(g.y, ScalarField(GridDomain(3, 2), {3, 6, 12, 24, 0, 0}));
}

TEST(Divergence, RowExample) {
  VectorField p(row({1, 2, 0}), row({0, 0, 0}));
  EXPECT_EQ(divergence(p), row({1, 1, -2}));
}

TEST(Divergence, ZeroIsZero) { EXPECT_EQ(divergence(VectorField(GridDomain(4, 3))), ScalarField(GridDomain(4, 3))); }

TEST(Divergence, RejectsMismatchedComponents) {
  EXPECT_THROW(VectorField(ScalarField(GridDomain(2, 2)), ScalarField(GridDomain(2, 3))), DomainError);
}

TEST(Adjoint, Random8x8) {
  std::mt19937_64 rng(7);
  const GridDomain d(8, 8);
  const ScalarField u = oracle::random_field(d, rng, -1, 1);
  const VectorField p(oracle::random_field(d, rng, -1, 1), oracle::random_field(d, rng, -1, 1));
  EXPECT_NEAR(inner(gradient(u), p), -inner(u, divergence(p)), 1e-12);
}

TEST(Adjoint, RandomGridsUpTo32) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> side(1, 32);
  for (int t = 0; t < 200; ++t) {
    const GridDomain d(side(rng), side(rng));
    const ScalarField u = oracle::random_field(d, rng, -1, 1);
    const VectorField p(oracle::random_field(d, rng, -1, 1), oracle::random_field(d, rng, -1, 1));
    EXPECT_NEAR(inner(gradient(u), p) + inner(u, divergence(p)), 0.0, 1e-12) << to_string(d);
  }
}

TEST(ProjectScalar, Examples) {
  const ScalarField cap(GridDomain(1, 3), 1.0);
  EXPECT_EQ(project_scalar_capacity(row({1.5, 0.5, -0.3}), cap), row({1.0, 0.5, -0.3}));
}

TEST(ProjectVector, Examples) {
  const GridDomain d(1, 1);
  VectorField p(ScalarField(d, 3.0), ScalarField(d, 4.0));
  const VectorField inside = project_vector_capacity(p, ScalarField(d, 10.0), TvMode::isotropic);
  EXPECT_EQ(inside.x[0], 3.0);
  EXPECT_EQ(inside.y[0], 4.0);

  VectorField q(ScalarField(d, 6.0), ScalarField(d, 8.0));
  const VectorField iso = project_vector_capacity(q, ScalarField(d, 5.0), TvMode::isotropic);
  EXPECT_NEAR(iso.x[0], 3.0, 1e-15);
  EXPECT_NEAR(iso.y[0], 4.0, 1e-15);
  const VectorField aniso = project_vector_capacity(q, ScalarField(d, 5.0), TvMode::anisotropic);
  EXPECT_EQ(aniso.x[0], 5.0);
  EXPECT_EQ(aniso.y[0], 5.0);
}

TEST(Projection, IdempotentAndFeasible) {
  std::mt19937_64 rng(3);
  const GridDomain d(16, 16);
  for (TvMode mode : {TvMode::isotropic, TvMode::anisotropic}) {
    for (int t = 0; t < 20; ++t) {
      const ScalarField cap = oracle::random_field(d, rng, 0, 1);
      const VectorField p(oracle::random_field(d, rng, -3, 3), oracle::random_field(d, rng, -3, 3));
      const VectorField once = project_vector_capacity(p, cap, mode);
      EXPECT_EQ(project_vector_capacity(once, cap, mode), once);
      for (std::size_t i = 0; i < cap.size(); ++i) {
        EXPECT_LE(constraint_magnitude(once.x[i], once.y[i], mode), cap[i] + 1e-12);
      }
      const ScalarField f = oracle::random_field(d, rng, -3, 3);
      const ScalarField fs = project_scalar_capacity(f, cap);
      EXPECT_EQ(project_scalar_capacity(fs, cap), fs);
    }
  }
}

TEST(TvEnergy, Examples) {
  const ScalarField u = vertical_split_4x4();
  EXPECT_DOUBLE_EQ(tv_energy(u, ScalarField(u.domain(), 1.0), TvMode::isotropic), 4.0);
  EXPECT_DOUBLE_EQ(tv_energy(u, ScalarField(u.domain(), 0.5), TvMode::isotropic), 2.0);
  EXPECT_DOUBLE_EQ(tv_energy(ScalarField(u.domain(), 0.3), ScalarField(u.domain(), 1.0), TvMode::isotropic), 0.0);
}

TEST(TvEnergy, NonnegativeAndZeroOnlyWhenConstant) {
  std::mt19937_64 rng(5);
  const GridDomain d(6, 5);
  const ScalarField c = oracle::random_field(d, rng, 0.1, 1.0);
  for (TvMode mode : {TvMode::isotropic, TvMode::anisotropic}) {
    for (int t = 0; t < 50; ++t) {
      ScalarField u(d, 0.7);
      EXPECT_EQ(tv_energy(u, c, mode), 0.0);
      u[static_cast<std::size_t>(t) % u.size()] += 1e-3;
      EXPECT_GT(tv_energy(u, c, mode), 0.0);
      EXPECT_GE(tv_energy(oracle::random_field(d, rng, -1, 1), c, mode), 0.0);
    }
  }
}

TEST(Parallel, MatchesSerialReferenceBitwise) {
  std::mt19937_64 rng(13);
  for (auto [h, w] : {std::pair<std::size_t, std::size_t>{1, 1}, {3, 17}, {64, 64}, {33, 5}}) {
    const GridDomain d(h, w);
    const ScalarField u = oracle::random_field(d, rng, -1, 1);
    const ScalarField cap = oracle::random_field(d, rng, 0, 1);
    const VectorField p(oracle::random_field(d, rng, -2, 2), oracle::random_field(d, rng, -2, 2));
    EXPECT_EQ(gradient(u), reference::gradient(u));
    EXPECT_EQ(divergence(p), reference::divergence(p));
    for (TvMode mode : {TvMode::isotropic, TvMode::anisotropic}) {
      EXPECT_EQ(project_vector_capacity(p, cap, mode), reference::project_vector_capacity(p, cap, mode));
      EXPECT_EQ(tv_energy(u, cap, mode), reference::tv_energy(u, cap, mode));
    }
  }
}

TEST(TvMode, ParsesNames) {
  EXPECT_EQ(parse_tv_mode("isotropic"), TvMode::isotropic);
  EXPECT_EQ(parse_tv_mode("anisotropic"), TvMode::anisotropic);
  EXPECT_THROW(parse_tv_mode("l2"), std::invalid_argument);
}
