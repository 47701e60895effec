#pragma once

#include <vector>

#include "rfmesh/fields.hpp"
#include "rfmesh/math.hpp"
#include "rfmesh/trimesh.hpp"

namespace rfmesh {

// Scalar samples on a res^3 lattice spanning `box` (x fastest, then y, z).
struct DensityVolume {
    int res = 0;
    AABB box;
    std::vector<double> values;

    double at(int x, int y, int z) const {
        return values[(static_cast<size_t>(z) * res + y) * res + x];
    }
    double& at(int x, int y, int z) {
        return values[(static_cast<size_t>(z) * res + y) * res + x];
    }
    Vec3 lattice_point(int x, int y, int z) const {
        Vec3 cell = box.extent() / static_cast<double>(res - 1);
        return box.lo + Vec3{x * cell.x, y * cell.y, z * cell.z};
    }
    // Edge length of one lattice cell (isotropic boxes only differ per axis).
    double cell_size() const { return box.extent().x / static_cast<double>(res - 1); }
};

DensityVolume make_density_volume(int res, const AABB& box);

// Evaluates the density field at every lattice point (parallel over z-slabs).
DensityVolume sample_density_volume(const GeometryField& geo, int res, const AABB& box);

// Lookup-table isosurface of the level set value == iso, with linear edge
// interpolation and lattice-edge-keyed vertex welding. Faces wind so normals
// point toward the low-value side (outward for density fields). An empty
// level set yields an empty mesh.
TriMesh marching_cubes(const DensityVolume& vol, double iso);

}  // namespace rfmesh
