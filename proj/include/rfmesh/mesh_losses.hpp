#pragma once

#include <vector>

#include "rfmesh/trimesh.hpp"

namespace rfmesh {

// Smoothness energy over effective positions p_i = v_i + dv_i:
//   (1/N) sum_i (1/|S_i|) sum_{j in S_i} |p_i - p_j|^2
// with S_i the one-ring of vertex i; isolated vertices contribute 0. When
// `grad` is non-null it is overwritten with d/d(dv_i), which equals d/dp_i.
double laplacian_loss(const TriMesh& mesh, const std::vector<std::vector<int>>& neighbors,
                      std::vector<Vec3>* grad);

// Convenience overload computing the one-ring itself.
double laplacian_loss(const TriMesh& mesh, std::vector<Vec3>* grad);

// Offset magnitude penalty: (1/N) sum_i |dv_i|^2, gradient 2 dv_i / N.
// A mesh without offsets scores 0.
double offset_loss(const TriMesh& mesh, std::vector<Vec3>* grad);

}  // namespace rfmesh
