#pragma once

// Appearance export: UV unwrapping into planar charts, baking the surface's
// diffuse color and specular features into textures, seam out-painting,
// 8-bit quantization, cascade-region extraction for unbounded scenes, and
// multi-file asset export (OBJ + MTL + PNGs + a JSON manifest carrying the
// specular MLP weights, the view-encoding spec, and per-file checksums).

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "rfmesh/fields.hpp"
#include "rfmesh/image.hpp"
#include "rfmesh/math.hpp"
#include "rfmesh/mesh_io.hpp"
#include "rfmesh/mlp.hpp"
#include "rfmesh/trimesh.hpp"

namespace rfmesh {

// Chart bounds in UV space (gutters excluded).
struct ChartBox {
    Vec2 lo, hi;
};

struct UVAtlas {
    std::vector<Vec2> uvs;                       // shared pool, all in [0,1]^2
    std::vector<std::array<int, 3>> face_uvs;    // parallels mesh.faces
    std::vector<int> chart_of_face;
    std::vector<ChartBox> charts;

    int chart_count() const { return static_cast<int>(charts.size()); }
};

struct UnwrapConfig {
    int texture_res = 1024;      // gutters are measured in texels of this grid
    int gutter_texels = 2;
    double angle_limit_deg = 60.0;
};

// Clusters faces into charts by greedy region growing (a face joins while its
// normal stays within the angle limit of the chart's area-weighted mean
// normal), flattens each chart onto its best-fit plane, and shelf-packs the
// charts into the unit square at a single uniform scale. Within a chart,
// faces share per-vertex UVs; seams appear only at chart borders.
UVAtlas unwrap_uv(const TriMesh& mesh, const UnwrapConfig& cfg = {});

struct BakedTextures {
    Image diffuse;               // float [0,1], row 0 at v = 1 (image top)
    Image specular;
    std::vector<uint8_t> mask;   // 1 where a texel center fell inside a face
};

// Rasterizes every face into texel space with affine barycentrics (UVs are
// affine per face), reconstructs the 3D surface point per covered texel, and
// stores the field's diffuse color and specular feature. Deterministic: face
// order resolves texel ownership, field evaluation is parallel per texel.
BakedTextures bake_textures(const TriMesh& mesh, const UVAtlas& atlas,
                            const AppearanceField& app, int resolution);

// Out-paints seams: each uncovered texel with covered 8-neighbors takes their
// mean; the mask grows by one ring per round. Covered texels never change.
void dilate_seams(Image& tex, std::vector<uint8_t>& mask, int rounds = 1);

// Returns the image quantized to 8-bit levels and mapped back to float
// (v -> round(clamp(v,0,1)*255)/255), i.e. exactly what a PNG round trip
// reconstructs.
Image quantize_image(const Image& img);

struct CascadeMesh {
    int k = 0;            // region covers [-2^k, 2^k]^3
    TriMesh mesh;
    int grid_res = 0;     // marching-cubes resolution actually used
};

// Extracts one mesh per cascade region k = 0..k_max over the growing boxes
// [-2^k, 2^k]^3 at resolution base_res/2^k (floor 8). k_max is
// ceil(log2(bound)) for bound > 1, else 0. For k >= 1, faces whose centroid
// lies inside the previous box [-2^{k-1}, 2^{k-1}]^3 are dropped so regions
// never overlap; unreferenced vertices are compacted away.
std::vector<CascadeMesh> export_cascade(const GeometryField& geo, double iso,
                                        int base_res, double scene_bound);

struct BakedRegion {
    int k = 0;
    TexturedMesh mesh;           // UVs populated from the region's atlas
    Image diffuse;
    Image specular;
    int resolution = 0;

    // Relative file names inside the asset directory; filled by export_asset
    // and by load_baked.
    std::string obj_file, mtl_file, diffuse_file, specular_file;
};

struct BakedAsset {
    std::vector<BakedRegion> regions;
    FieldMLP mlp2;               // (specular feature ++ view encoding) -> logits
    int sh_dim = 16;             // view-encoding basis size
};

// Writes OBJ/MTL plus the two PNGs per region and finally the manifest
// (asset.json) carrying MLP2 weights, the view-encoding spec, region metadata,
// and an FNV-1a64 checksum per written file. The manifest is written last so
// its presence marks a complete export. File name fields of `asset` are
// rewritten to the emitted names. Throws RuntimeFailure on I/O errors.
void export_asset(BakedAsset& asset, const std::string& out_dir);

// FNV-1a 64-bit over a whole file; throws InputError if unreadable.
uint64_t fnv1a64_file(const std::string& path);

}  // namespace rfmesh
