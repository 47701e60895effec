#pragma once

// Software equivalent of the exported fragment shader: loads a baked asset
// back from disk (validating checksums and shapes) and renders it with
// rasterization, bilinear texture fetches, and the small specular MLP. Uses
// only exported files, proving the asset is self-contained.

#include <string>

#include "rfmesh/bake.hpp"
#include "rfmesh/camera.hpp"
#include "rfmesh/image.hpp"

namespace rfmesh {

// Reads asset.json plus every file it references. Throws InputError when the
// manifest is missing or malformed, when a referenced file is missing or
// fails its checksum, or when weights or textures carry inconsistent shapes.
// Textures come back as float q/255 per channel.
BakedAsset load_baked(const std::string& dir);

// Rasterizes all region meshes into one z-buffer, then per covered pixel:
// bilinear-sample the diffuse and specular textures at the interpolated UV,
// run the specular MLP on (feature ++ view encoding), and output
// clamp(diffuse + specular, 0, 1). Uncovered pixels take the background.
Image render_baked(const BakedAsset& asset, const CameraModel& camera,
                   const Vec3& background);

// Bilinear fetch with edge clamping; uv in [0,1]^2 maps v = 1 to row 0.
Vec3 sample_bilinear(const Image& tex, const Vec2& uv);

}  // namespace rfmesh
