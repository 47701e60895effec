#pragma once

// Posed multi-view dataset with a train/test split. On disk: an images
// directory plus transforms_train.json / transforms_test.json manifests
// (camera_angle_x + per-frame cam-to-world matrices) and an optional
// scene.json carrying scene bound, background color, and generator params.

#include <string>
#include <vector>

#include <json.hpp>

#include "rfmesh/camera.hpp"
#include "rfmesh/image.hpp"

namespace rfmesh {

enum class Split { train, test };

struct PosedImage {
    CameraModel camera;
    Image pixels;
    Split split = Split::train;
    std::string name;
};

struct Dataset {
    std::vector<PosedImage> images;
    double scene_bound = 1.0;   // scene content fits in [-bound, bound]^3
    Vec3 background{1.0, 1.0, 1.0};
    nlohmann::json scene_desc;  // generator parameters when synthetic, else null

    std::vector<int> split_indices(Split s) const {
        std::vector<int> out;
        for (int i = 0; i < int(images.size()); ++i)
            if (images[i].split == s) out.push_back(i);
        return out;
    }
};

// Validates cameras and pixel dimensions; throws InputError on any mismatch,
// missing file, or malformed manifest.
Dataset load_dataset(const std::string& dir);

void save_dataset(const Dataset& ds, const std::string& dir);

}  // namespace rfmesh
