#include "rfmesh/dataset.hpp"

#include <filesystem>
#include <fstream>

#include "rfmesh/errors.hpp"

namespace rfmesh {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw InputError("malformed JSON in " + path + ": " + e.what());
    }
    return j;
}

void load_manifest(const std::string& dir, const std::string& manifest, Split split,
                   const Vec3& background, Dataset& ds) {
    json j = read_json_file(dir + "/" + manifest);
    if (!j.contains("camera_angle_x") || !j.contains("frames"))
        throw InputError(manifest + ": needs camera_angle_x and frames");
    double angle_x = j["camera_angle_x"].get<double>();

    for (const auto& frame : j["frames"]) {
        if (!frame.contains("file_path") || !frame.contains("transform_matrix"))
            throw InputError(manifest + ": frame needs file_path and transform_matrix");
        std::string rel = frame["file_path"].get<std::string>();
        std::string path = dir + "/" + rel;
        if (!fs::exists(path)) path += ".png";
        if (!fs::exists(path)) throw InputError("missing image: " + dir + "/" + rel);

        PosedImage pi;
        pi.split = split;
        pi.name = fs::path(rel).filename().string();
        pi.pixels = load_png(path, background);

        const auto& tm = frame["transform_matrix"];
        if (!tm.is_array() || tm.size() != 4)
            throw InputError(manifest + ": transform_matrix must be 4x4");
        for (int r = 0; r < 4; ++r) {
            if (!tm[r].is_array() || tm[r].size() != 4)
                throw InputError(manifest + ": transform_matrix must be 4x4");
            for (int c = 0; c < 4; ++c) pi.camera.cam_to_world.m[r][c] = tm[r][c].get<double>();
        }
        pi.camera.width = pi.pixels.width;
        pi.camera.height = pi.pixels.height;
        pi.camera.fx = 0.5 * pi.pixels.width / std::tan(0.5 * angle_x);
        pi.camera.fy = pi.camera.fx;
        pi.camera.cx = 0.5 * pi.pixels.width;
        pi.camera.cy = 0.5 * pi.pixels.height;
        pi.camera.validate();
        ds.images.push_back(std::move(pi));
    }
}

ordered_json manifest_json(const Dataset& ds, Split split, const std::string& subdir) {
    const PosedImage* first = nullptr;
    for (const auto& im : ds.images)
        if (im.split == split) {
            first = &im;
            break;
        }
    ordered_json j;
    j["camera_angle_x"] = first ? first->camera.fov_x() : 0.0;
    j["frames"] = ordered_json::array();
    for (const auto& im : ds.images) {
        if (im.split != split) continue;
        ordered_json f;
        f["file_path"] = "./" + subdir + "/" + fs::path(im.name).stem().string();
        auto mat = ordered_json::array();
        for (int r = 0; r < 4; ++r) {
            auto row = ordered_json::array();
            for (int c = 0; c < 4; ++c) row.push_back(im.camera.cam_to_world.m[r][c]);
            mat.push_back(row);
        }
        f["transform_matrix"] = mat;
        j["frames"].push_back(f);
    }
    return j;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw RuntimeFailure("cannot write " + path);
    out << text;
}

}  // namespace

Dataset load_dataset(const std::string& dir) {
    if (!fs::is_directory(dir)) throw InputError("dataset directory not found: " + dir);

    Dataset ds;
    std::string scene_path = dir + "/scene.json";
    if (fs::exists(scene_path)) {
        json s = read_json_file(scene_path);
        if (s.contains("scene_bound")) ds.scene_bound = s["scene_bound"].get<double>();
        if (s.contains("background")) {
            auto b = s["background"];
            ds.background = {b[0].get<double>(), b[1].get<double>(), b[2].get<double>()};
        }
        ds.scene_desc = s.value("generator", json());
    }
    if (!(ds.scene_bound > 0.0)) throw InputError("scene.json: scene_bound must be positive");

    if (!fs::exists(dir + "/transforms_train.json"))
        throw InputError("missing manifest: " + dir + "/transforms_train.json");
    load_manifest(dir, "transforms_train.json", Split::train, ds.background, ds);
    if (fs::exists(dir + "/transforms_test.json"))
        load_manifest(dir, "transforms_test.json", Split::test, ds.background, ds);

    if (ds.images.empty()) throw InputError("dataset has no images: " + dir);
    return ds;
}

void save_dataset(const Dataset& ds, const std::string& dir) {
    fs::create_directories(dir + "/train");
    fs::create_directories(dir + "/test");

    for (const auto& im : ds.images) {
        std::string sub = im.split == Split::train ? "train" : "test";
        save_png(dir + "/" + sub + "/" + im.name, im.pixels);
    }

    write_text(dir + "/transforms_train.json", manifest_json(ds, Split::train, "train").dump(2) + "\n");
    write_text(dir + "/transforms_test.json", manifest_json(ds, Split::test, "test").dump(2) + "\n");

    ordered_json s;
    s["scene_bound"] = ds.scene_bound;
    s["background"] = {ds.background.x, ds.background.y, ds.background.z};
    if (!ds.scene_desc.is_null()) s["generator"] = ds.scene_desc;
    write_text(dir + "/scene.json", s.dump(2) + "\n");
}

}  // namespace rfmesh
