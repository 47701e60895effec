#pragma once

#include <vector>

#include "rfmesh/trimesh.hpp"

namespace rfmesh {

struct DecimateResult {
    int faces_before = 0;
    int faces_after = 0;
    bool reached_target = false;  // false = best effort, no valid collapse left
};

// Quadric-error edge collapse until the face count is at most target_faces.
// Collapses that would pinch the surface (link condition), flip a surviving
// face normal, or move a pinned vertex are rejected. Requires offsets to be
// folded (they are ignored and cleared).
DecimateResult decimate(TriMesh& mesh, int target_faces);

// Same, restricted to the listed faces. Vertices shared with the rest of the
// mesh are pinned, so everything outside the region is bit-identical after.
DecimateResult decimate_region(TriMesh& mesh, const std::vector<int>& region_faces,
                               int target_region_faces);

}  // namespace rfmesh
