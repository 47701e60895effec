#pragma once

#include <vector>

#include "rfmesh/trimesh.hpp"

namespace rfmesh {

struct RemeshResult {
    int region_faces_before = 0;
    int region_faces_after = 0;
    // Ids of the re-triangulated faces in the output mesh.
    std::vector<int> region_after;
};

// Re-triangulates the selected faces toward a uniform target edge length:
// quadric decimation to the equilateral-triangle budget for the region area,
// then iterated long-edge splits, short-edge collapses, and valence-improving
// flips. Vertices shared with unselected faces are pinned (bit-identical
// positions); only edges fully interior to the region are split.
RemeshResult remesh_region(TriMesh& mesh, const std::vector<int>& region_faces,
                           double target_edge);

}  // namespace rfmesh
