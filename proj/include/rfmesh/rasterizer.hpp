#pragma once

// Deterministic software rasterizer. Forward: single-layer G-buffer with
// perspective-correct barycentrics, center-in-triangle coverage with a
// top-left tie rule, two-sided faces, and near-plane clipping that keeps
// parent-triangle barycentrics. Shading evaluates the appearance field at
// the interpolated world position. Backward treats coverage and barycentrics
// as constants: gradients flow through the interpolated position only, so
// silhouettes contribute no gradient.

#include <vector>

#include "rfmesh/camera.hpp"
#include "rfmesh/fields.hpp"
#include "rfmesh/image.hpp"
#include "rfmesh/trimesh.hpp"

namespace rfmesh {

struct Fragment {
    int face = -1;  // -1 marks background
    double b0 = 0.0, b1 = 0.0, b2 = 0.0;  // barycentrics on the source face
    Vec3 x;             // world position interpolated with the barycentrics
    double depth = 0.0; // camera-space distance along the optical axis
    Vec3 normal;        // unit geometric normal of the source face
};

struct FragmentBuffer {
    int width = 0;
    int height = 0;
    std::vector<Fragment> frags;  // row-major, origin at top-left

    FragmentBuffer() = default;
    FragmentBuffer(int w, int h) : width(w), height(h), frags(size_t(w) * h) {}

    Fragment& at(int x, int y) { return frags[size_t(y) * width + x]; }
    const Fragment& at(int x, int y) const { return frags[size_t(y) * width + x]; }
    bool covered(int x, int y) const { return at(x, y).face >= 0; }
    int covered_count() const;
};

// Pixel centers sit at (x+0.5, y+0.5). Faces behind the near plane are
// clipped; a fully clipped mesh yields an all-background buffer. Tiled and
// parallel execution are bit-identical to a serial scan because the winning
// fragment per pixel is the lexicographic minimum of (depth, face, subface);
// a tile_size covering the whole image degenerates to a serial scanline.
FragmentBuffer rasterize(const TriMesh& mesh, const CameraModel& camera, int tile_size = 64);

// Debug views: hashed face colors, and depth normalized to [0,1] over the
// covered range (background black).
Image face_id_map(const FragmentBuffer& frag);
Image depth_map(const FragmentBuffer& frag);

// Covered pixels: c = c_d(x) + c_s(f_s(x), x - camera); diffuse_only drops
// the specular term. Uncovered pixels take the background color.
Image shade(const FragmentBuffer& frag, const AppearanceField& app, const CameraModel& camera,
            const Vec3& background, bool diffuse_only);

// Chain dL/dimage back to appearance parameters and vertex positions, holding
// coverage and barycentrics fixed. dvertex is resized to the vertex count and
// overwritten; entries of faces covering no pixels are exactly zero. Throws
// RuntimeFailure if the buffer does not match the mesh or image.
void shade_backward(const FragmentBuffer& frag, const Image& dL_dimage, const TriMesh& mesh,
                    const AppearanceField& app, const CameraModel& camera, bool diffuse_only,
                    AppearanceGrad& app_grad, std::vector<Vec3>& dvertex);

}  // namespace rfmesh
