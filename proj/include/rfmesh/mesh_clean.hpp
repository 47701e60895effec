#pragma once

#include <string>
#include <vector>

#include "rfmesh/camera.hpp"
#include "rfmesh/trimesh.hpp"

namespace rfmesh {

struct VisibilityReport {
    int faces_before = 0;
    int faces_removed = 0;
    bool no_cameras = false;  // warning flag: mesh returned unchanged
};

// Keeps faces whose first camera-ray intersection is the face itself, then
// dilates the kept set `dilation_rounds` times across edge-shared neighbors.
// Orphaned vertices are dropped.
VisibilityReport visibility_cull(TriMesh& mesh, const std::vector<CameraModel>& cameras,
                                 int dilation_rounds);

struct CleanConfig {
    double merge_eps = -1.0;               // < 0: 1e-5 x bounding-box diagonal
    int min_component_faces = 8;           // floaters: smaller than BOTH thresholds
    double min_component_diameter = -1.0;  // < 0: 2% of bounding-box diagonal
};

struct CleanReport {
    int merged_vertices = 0;
    int degenerate_faces_removed = 0;
    int duplicate_faces_removed = 0;
    int nonmanifold_faces_removed = 0;
    int split_fan_vertices = 0;
    int floater_faces_removed = 0;
    int unreferenced_vertices_removed = 0;

    bool changed() const {
        return merged_vertices || degenerate_faces_removed || duplicate_faces_removed ||
               nonmanifold_faces_removed || split_fan_vertices || floater_faces_removed ||
               unreferenced_vertices_removed;
    }
    std::string to_string() const;
};

// Merge near-coincident vertices, drop degenerate/duplicate faces, repair
// non-manifold edges (smallest-area offender deleted) and vertices (fan
// duplication), remove small floater components, compact. Idempotent.
CleanReport clean_mesh(TriMesh& mesh, const CleanConfig& cfg = {});

}  // namespace rfmesh
