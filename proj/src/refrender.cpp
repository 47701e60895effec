#include "rfmesh/refrender.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "rfmesh/errors.hpp"
#include "rfmesh/parallel.hpp"
#include "rfmesh/rasterizer.hpp"
#include "rfmesh/sh.hpp"

namespace rfmesh {

namespace {

using nlohmann::json;

[[noreturn]] void bad_asset(const std::string& what) {
    throw InputError("asset: " + what);
}

}  // namespace

BakedAsset load_baked(const std::string& dir) {
    std::ifstream in(dir + "/asset.json");
    if (!in) bad_asset("manifest missing: " + dir + "/asset.json");
    json manifest;
    try {
        in >> manifest;
    } catch (const json::exception& e) {
        bad_asset("manifest parse failed: " + std::string(e.what()));
    }

    try {
        if (manifest.at("format").get<std::string>() != "rfmesh-baked-1")
            bad_asset("unknown format: " + manifest["format"].get<std::string>());

        for (const auto& [name, sum] : manifest.at("checksums").items()) {
            std::string expect = sum.get<std::string>();
            uint64_t have = fnv1a64_file(dir + "/" + name);  // throws naming a missing file
            char buf[17];
            std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(have));
            if (expect != buf) bad_asset("checksum mismatch for " + name);
        }

        BakedAsset asset;
        const json& enc = manifest.at("view_encoding");
        if (enc.at("type").get<std::string>() != "sh") bad_asset("unsupported view encoding");
        asset.sh_dim = enc.at("dim").get<int>();
        if (asset.sh_dim != kShDim) bad_asset("unsupported view encoding size");

        const json& m2 = manifest.at("mlp2");
        std::vector<int> dims = m2.at("dims").get<std::vector<int>>();
        const json& layers = m2.at("layers");
        if (dims.size() < 2 || layers.size() != dims.size() - 1)
            bad_asset("mlp2 layer count does not match dims");
        for (size_t l = 0; l < layers.size(); ++l) {
            FieldMLP::Layer layer;
            layer.in = layers[l].at("in").get<int>();
            layer.out = layers[l].at("out").get<int>();
            if (layer.in != dims[l] || layer.out != dims[l + 1])
                bad_asset("mlp2 layer dims inconsistent");
            layer.w = layers[l].at("w").get<std::vector<double>>();
            layer.b = layers[l].at("b").get<std::vector<double>>();
            if (layer.w.size() != size_t(layer.in) * layer.out || layer.b.size() != size_t(layer.out))
                bad_asset("mlp2 weight shape mismatch");
            asset.mlp2.layers.push_back(std::move(layer));
        }
        if (asset.mlp2.input_dim() != 3 + asset.sh_dim) bad_asset("mlp2 input dim must be 3+encoding");
        if (asset.mlp2.output_dim() != 3) bad_asset("mlp2 must output 3 channels");

        for (const json& jr : manifest.at("regions")) {
            BakedRegion region;
            region.k = jr.at("k").get<int>();
            region.resolution = jr.at("resolution").get<int>();
            region.obj_file = jr.at("obj").get<std::string>();
            region.mtl_file = jr.at("mtl").get<std::string>();
            region.diffuse_file = jr.at("diffuse").get<std::string>();
            region.specular_file = jr.at("specular").get<std::string>();
            region.mesh = load_obj(dir + "/" + region.obj_file);
            if (!region.mesh.has_uvs() && !region.mesh.mesh.faces.empty())
                bad_asset(region.obj_file + " has no texture coordinates");
            region.diffuse = load_png(dir + "/" + region.diffuse_file, Vec3{});
            region.specular = load_png(dir + "/" + region.specular_file, Vec3{});
            for (const auto& [tex, name] :
                 {std::pair{&region.diffuse, &region.diffuse_file},
                  std::pair{&region.specular, &region.specular_file}})
                if (tex->width != region.resolution || tex->height != region.resolution)
                    bad_asset(*name + ": texture size does not match manifest");
            asset.regions.push_back(std::move(region));
        }
        return asset;
    } catch (const json::exception& e) {
        bad_asset("manifest field error: " + std::string(e.what()));
    }
}

Vec3 sample_bilinear(const Image& tex, const Vec2& uv) {
    double px = uv.x * tex.width - 0.5;
    double py = (1.0 - uv.y) * tex.height - 0.5;
    int x0 = static_cast<int>(std::floor(px));
    int y0 = static_cast<int>(std::floor(py));
    double fx = px - x0, fy = py - y0;
    auto cx = [&](int x) { return std::min(tex.width - 1, std::max(0, x)); };
    auto cy = [&](int y) { return std::min(tex.height - 1, std::max(0, y)); };
    Vec3 c00 = tex.at(cx(x0), cy(y0));
    Vec3 c10 = tex.at(cx(x0 + 1), cy(y0));
    Vec3 c01 = tex.at(cx(x0), cy(y0 + 1));
    Vec3 c11 = tex.at(cx(x0 + 1), cy(y0 + 1));
    Vec3 top = c00 * (1.0 - fx) + c10 * fx;
    Vec3 bot = c01 * (1.0 - fx) + c11 * fx;
    return top * (1.0 - fy) + bot * fy;
}

Image render_baked(const BakedAsset& asset, const CameraModel& camera,
                   const Vec3& background) {
    // One z-buffer across regions: meshes merge with a face-source table.
    TriMesh merged;
    std::vector<std::pair<int, int>> face_src;  // (region index, local face)
    for (size_t r = 0; r < asset.regions.size(); ++r) {
        const TriMesh& m = asset.regions[r].mesh.mesh;
        int vbase = static_cast<int>(merged.vertices.size());
        for (size_t v = 0; v < m.vertices.size(); ++v)
            merged.vertices.push_back(m.position(static_cast<int>(v)));
        for (size_t f = 0; f < m.faces.size(); ++f) {
            const auto& tri = m.faces[f];
            merged.faces.push_back({tri[0] + vbase, tri[1] + vbase, tri[2] + vbase});
            face_src.push_back({static_cast<int>(r), static_cast<int>(f)});
        }
    }

    FragmentBuffer frag = rasterize(merged, camera);
    Image out(frag.width, frag.height, background);
    Vec3 origin = camera.position();
    parallel_chunks(out.pixel_count(), 0, [&](int, int64_t begin, int64_t end) {
        std::vector<double> input(3 + kShDim);
        std::vector<double> logits(3);
        for (int64_t i = begin; i < end; ++i) {
            const Fragment& fr = frag.frags[size_t(i)];
            if (fr.face < 0) continue;
            auto [r, lf] = face_src[fr.face];
            const BakedRegion& region = asset.regions[r];
            const auto& uv_ids = region.mesh.face_uvs[lf];
            Vec2 uv = region.mesh.uvs[uv_ids[0]] * fr.b0 + region.mesh.uvs[uv_ids[1]] * fr.b1 +
                      region.mesh.uvs[uv_ids[2]] * fr.b2;
            Vec3 c_d = sample_bilinear(region.diffuse, uv);
            Vec3 f_s = sample_bilinear(region.specular, uv);
            input[0] = f_s.x;
            input[1] = f_s.y;
            input[2] = f_s.z;
            sh_basis(normalize(fr.x - origin), &input[3]);
            asset.mlp2.forward(input.data(), logits.data());
            Vec3 c_s{sigmoid(logits[0]), sigmoid(logits[1]), sigmoid(logits[2])};
            out.set_index(size_t(i), clamp01(c_d + c_s));
        }
    });
    return out;
}

}  // namespace rfmesh
