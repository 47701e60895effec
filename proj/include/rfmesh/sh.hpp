#pragma once

// Real spherical harmonics of a unit direction, degrees 0..3 (16 values),
// used as the view-direction encoding. Gradients are provided with respect
// to an unnormalized direction, chaining through the normalization.

#include "rfmesh/math.hpp"

namespace rfmesh {

constexpr int kShDim = 16;

// d must be unit length.
void sh_basis(const Vec3& d, double out[kShDim]);

// Per-coefficient gradient with respect to the unit direction.
void sh_basis_grad(const Vec3& d, double out[kShDim], Vec3 grad[kShDim]);

// Given dL/d(sh) for a basis evaluated at normalize(v), returns dL/dv.
Vec3 sh_chain_unnormalized(const Vec3& v, const double dL_dsh[kShDim]);

}  // namespace rfmesh
