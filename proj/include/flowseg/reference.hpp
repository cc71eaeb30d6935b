#pragma once

// Serial, loop-per-definition versions of the parallel kernels. Kept for
// testing and benchmarking only.

#include <span>

#include "flowseg/conv.hpp"
#include "flowseg/field.hpp"
#include "flowseg/solver.hpp"

namespace flowseg::reference {

VectorField gradient(const ScalarField& u);
ScalarField divergence(const VectorField& p);
VectorField project_vector_capacity(const VectorField& p, const ScalarField& cap, TvMode mode);
double tv_energy(const ScalarField& u, const ScalarField& c_edge, TvMode mode);

void step(FlowState& state, const CapacityMaps& caps, const SolverConfig& cfg);
SolverResult solve(const CapacityMaps& caps, const SolverConfig& cfg);

Tensor3 conv2d_forward(const Tensor3& in, std::span<const double> weight, std::span<const double> bias,
                       const ConvShape& s);
Tensor3 deconv2d_forward(const Tensor3& in, std::span<const double> weight, std::span<const double> bias,
                         const ConvShape& s);

}  // namespace flowseg::reference
