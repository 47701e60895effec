#pragma once

#include <vector>

#include "rfmesh/trimesh.hpp"

namespace rfmesh {

struct SubdivideResult {
    int faces_subdivided = 0;  // selected faces that split 1 -> 4
    int midpoints_added = 0;
    // For every face of the resulting mesh, the face id it came from in the
    // input mesh (identity for untouched faces).
    std::vector<int> parent;
};

// Splits each selected face whose edges are all >= min_edge into four at its
// edge midpoints. Midpoints are welded per edge, and any face sharing a split
// edge is split too (1->2 or 1->3) so the surface stays crack-free. Selected
// faces with any edge < min_edge are skipped. Geometry is preserved exactly;
// midpoint offsets average the endpoints' offsets.
SubdivideResult midpoint_subdivide(TriMesh& mesh, const std::vector<int>& face_ids,
                                   double min_edge);

}  // namespace rfmesh
