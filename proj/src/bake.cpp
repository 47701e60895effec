#include "rfmesh/bake.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <unordered_map>

#include <json.hpp>

#include "rfmesh/errors.hpp"
#include "rfmesh/marching_cubes.hpp"
#include "rfmesh/parallel.hpp"

namespace rfmesh {

namespace {

using nlohmann::json;

Vec3 face_raw_normal(const TriMesh& mesh, int f) {
    const auto& tri = mesh.faces[f];
    return cross(mesh.position(tri[1]) - mesh.position(tri[0]),
                 mesh.position(tri[2]) - mesh.position(tri[0]));
}

// Orthonormal tangent frame for a unit normal; stable axis choice.
void tangent_frame(const Vec3& n, Vec3& u, Vec3& v) {
    Vec3 pick = std::abs(n.x) <= std::abs(n.y) && std::abs(n.x) <= std::abs(n.z)
                    ? Vec3{1, 0, 0}
                    : (std::abs(n.y) <= std::abs(n.z) ? Vec3{0, 1, 0} : Vec3{0, 0, 1});
    u = cross(n, pick);
    double len = norm(u);
    u = len > 0.0 ? u * (1.0 / len) : Vec3{1, 0, 0};
    v = cross(n, u);
}

struct ChartRect {
    int chart = 0;
    double w = 0.0, h = 0.0;   // world-scale 2D extent
    double ox = 0.0, oy = 0.0; // packed UV origin
};

// Shelf packer; returns false when the layout spills out of the unit square.
bool shelf_pack(std::vector<ChartRect>& rects, double scale, double gutter) {
    double x = gutter, y = gutter, shelf_h = 0.0;
    for (ChartRect& r : rects) {
        double w = r.w * scale, h = r.h * scale;
        if (x + w > 1.0 - gutter && x > gutter) {
            y += shelf_h + gutter;
            x = gutter;
            shelf_h = 0.0;
        }
        if (x + w > 1.0 - gutter || y + h > 1.0 - gutter) return false;
        r.ox = x;
        r.oy = y;
        x += w + gutter;
        shelf_h = std::max(shelf_h, h);
    }
    return true;
}

}  // namespace

UVAtlas unwrap_uv(const TriMesh& mesh, const UnwrapConfig& cfg) {
    UVAtlas atlas;
    int nf = static_cast<int>(mesh.faces.size());
    atlas.face_uvs.assign(nf, {0, 0, 0});
    atlas.chart_of_face.assign(nf, -1);
    if (nf == 0) return atlas;

    std::vector<Vec3> raw(nf);
    std::vector<Vec3> unit(nf);
    for (int f = 0; f < nf; ++f) {
        raw[f] = face_raw_normal(mesh, f);
        double len = norm(raw[f]);
        unit[f] = len > 0.0 ? raw[f] * (1.0 / len) : Vec3{};
    }

    std::unordered_map<uint64_t, std::vector<int>> edge_faces;
    for (int f = 0; f < nf; ++f) {
        const auto& tri = mesh.faces[f];
        for (int e = 0; e < 3; ++e)
            edge_faces[edge_key(tri[e], tri[(e + 1) % 3])].push_back(f);
    }

    // Greedy region growing: a face joins while its normal stays within the
    // angle limit of the chart's running area-weighted mean normal.
    double cos_limit = std::cos(cfg.angle_limit_deg * kPi / 180.0);
    std::vector<std::vector<int>> chart_faces;
    for (int seed = 0; seed < nf; ++seed) {
        if (atlas.chart_of_face[seed] >= 0) continue;
        int chart = static_cast<int>(chart_faces.size());
        chart_faces.push_back({seed});
        atlas.chart_of_face[seed] = chart;
        Vec3 nsum = raw[seed];
        for (size_t head = 0; head < chart_faces[chart].size(); ++head) {
            int f = chart_faces[chart][head];
            const auto& tri = mesh.faces[f];
            for (int e = 0; e < 3; ++e) {
                for (int g : edge_faces[edge_key(tri[e], tri[(e + 1) % 3])]) {
                    if (atlas.chart_of_face[g] >= 0) continue;
                    double len = norm(nsum);
                    if (len <= 0.0) continue;
                    if (dot(unit[g], nsum * (1.0 / len)) < cos_limit) continue;
                    atlas.chart_of_face[g] = chart;
                    chart_faces[chart].push_back(g);
                    nsum = nsum + raw[g];
                }
            }
        }
    }
    int nc = static_cast<int>(chart_faces.size());

    // Flatten each chart onto its best-fit plane (area-weighted mean normal
    // through the first vertex). Face normals sit within the angle limit of
    // the mean, so projected faces keep a positive orientation.
    std::vector<std::vector<std::pair<int, Vec2>>> chart_pts(nc);  // vertex -> 2D
    std::vector<ChartRect> rects(nc);
    for (int c = 0; c < nc; ++c) {
        Vec3 nsum{};
        for (int f : chart_faces[c]) nsum = nsum + raw[f];
        double len = norm(nsum);
        Vec3 n = len > 0.0 ? nsum * (1.0 / len) : Vec3{0, 0, 1};
        Vec3 u, v;
        tangent_frame(n, u, v);
        Vec3 origin = mesh.position(mesh.faces[chart_faces[c][0]][0]);

        std::unordered_map<int, int> seen;  // vertex id -> chart_pts index
        Vec2 lo{kInf, kInf}, hi{-kInf, -kInf};
        for (int f : chart_faces[c]) {
            for (int corner : mesh.faces[f]) {
                if (seen.count(corner)) continue;
                seen[corner] = static_cast<int>(chart_pts[c].size());
                Vec3 d = mesh.position(corner) - origin;
                Vec2 p{dot(d, u), dot(d, v)};
                chart_pts[c].push_back({corner, p});
                lo.x = std::min(lo.x, p.x);
                lo.y = std::min(lo.y, p.y);
                hi.x = std::max(hi.x, p.x);
                hi.y = std::max(hi.y, p.y);
            }
        }
        for (auto& [corner, p] : chart_pts[c]) p = p - lo;
        rects[c] = {c, hi.x - lo.x, hi.y - lo.y, 0.0, 0.0};
    }

    // Pack at the largest uniform scale that fits: shelf order is tallest
    // first, the scale comes from a bisection between a known-good and a
    // known-bad value.
    std::sort(rects.begin(), rects.end(), [](const ChartRect& a, const ChartRect& b) {
        if (a.h != b.h) return a.h > b.h;
        return a.chart < b.chart;
    });
    double gutter = static_cast<double>(cfg.gutter_texels) / std::max(1, cfg.texture_res);
    double max_dim = 0.0;
    for (const ChartRect& r : rects) max_dim = std::max({max_dim, r.w, r.h});
    double scale = 1.0;
    if (max_dim > 0.0) {
        double hi_s = (1.0 - 2.0 * gutter) / max_dim;  // upper bound: largest chart fits a shelf
        double lo_s = hi_s;
        while (!shelf_pack(rects, lo_s, gutter)) lo_s *= 0.5;
        for (int it = 0; it < 60 && hi_s - lo_s > 1e-12 * hi_s; ++it) {
            double mid = 0.5 * (lo_s + hi_s);
            if (shelf_pack(rects, mid, gutter))
                lo_s = mid;
            else
                hi_s = mid;
        }
        scale = lo_s;
        shelf_pack(rects, scale, gutter);  // leave origins at the final scale
    } else {
        shelf_pack(rects, scale, gutter);
    }

    std::vector<ChartRect> by_chart(nc);
    for (const ChartRect& r : rects) by_chart[r.chart] = r;

    // Emit per-corner UVs; vertices are shared within a chart.
    atlas.charts.resize(nc);
    std::vector<int> uv_base(nc, 0);
    for (int c = 0; c < nc; ++c) {
        const ChartRect& r = by_chart[c];
        uv_base[c] = static_cast<int>(atlas.uvs.size());
        for (const auto& [corner, p] : chart_pts[c]) {
            Vec2 uv{r.ox + p.x * scale, r.oy + p.y * scale};
            uv.x = std::min(1.0, std::max(0.0, uv.x));
            uv.y = std::min(1.0, std::max(0.0, uv.y));
            atlas.uvs.push_back(uv);
        }
        atlas.charts[c] = {{r.ox, r.oy}, {r.ox + r.w * scale, r.oy + r.h * scale}};
    }
    for (int c = 0; c < nc; ++c) {
        std::unordered_map<int, int> index;
        for (size_t i = 0; i < chart_pts[c].size(); ++i) index[chart_pts[c][i].first] = int(i);
        for (int f : chart_faces[c])
            for (int e = 0; e < 3; ++e)
                atlas.face_uvs[f][e] = uv_base[c] + index[mesh.faces[f][e]];
    }
    return atlas;
}

BakedTextures bake_textures(const TriMesh& mesh, const UVAtlas& atlas,
                            const AppearanceField& app, int resolution) {
    if (atlas.face_uvs.size() != mesh.faces.size())
        throw RuntimeFailure("bake: atlas does not match mesh");
    if (resolution <= 0) throw RuntimeFailure("bake: nonpositive resolution");
    int res = resolution;
    BakedTextures out;
    out.diffuse = Image(res, res);
    out.specular = Image(res, res);
    out.mask.assign(size_t(res) * res, 0);

    // Pass 1: texel ownership by serial face order (deterministic overwrite).
    // Image row 0 holds v near 1, so py = (1 - v) * res.
    std::vector<int> owner(size_t(res) * res, -1);
    std::vector<double> bary(size_t(res) * res * 3, 0.0);
    for (size_t f = 0; f < mesh.faces.size(); ++f) {
        Vec2 p[3];
        for (int e = 0; e < 3; ++e) {
            Vec2 uv = atlas.uvs[atlas.face_uvs[f][e]];
            p[e] = {uv.x * res, (1.0 - uv.y) * res};
        }
        double area = (p[1].x - p[0].x) * (p[2].y - p[0].y) -
                      (p[1].y - p[0].y) * (p[2].x - p[0].x);
        if (area == 0.0) continue;
        double orient = area > 0.0 ? 1.0 : -1.0;
        double lox = std::min({p[0].x, p[1].x, p[2].x});
        double hix = std::max({p[0].x, p[1].x, p[2].x});
        double loy = std::min({p[0].y, p[1].y, p[2].y});
        double hiy = std::max({p[0].y, p[1].y, p[2].y});
        int tx0 = std::max(0, static_cast<int>(std::floor(lox - 0.5)));
        int tx1 = std::min(res - 1, static_cast<int>(std::ceil(hix - 0.5)));
        int ty0 = std::max(0, static_cast<int>(std::floor(loy - 0.5)));
        int ty1 = std::min(res - 1, static_cast<int>(std::ceil(hiy - 0.5)));
        for (int ty = ty0; ty <= ty1; ++ty) {
            for (int tx = tx0; tx <= tx1; ++tx) {
                double cx = tx + 0.5, cy = ty + 0.5;
                double w0 = ((p[2].x - p[1].x) * (cy - p[1].y) -
                             (p[2].y - p[1].y) * (cx - p[1].x)) * orient;
                double w1 = ((p[0].x - p[2].x) * (cy - p[2].y) -
                             (p[0].y - p[2].y) * (cx - p[2].x)) * orient;
                double w2 = ((p[1].x - p[0].x) * (cy - p[0].y) -
                             (p[1].y - p[0].y) * (cx - p[0].x)) * orient;
                if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;
                double sum = w0 + w1 + w2;
                if (sum <= 0.0) continue;
                size_t t = size_t(ty) * res + tx;
                owner[t] = static_cast<int>(f);
                bary[t * 3] = w0 / sum;
                bary[t * 3 + 1] = w1 / sum;
                bary[t * 3 + 2] = w2 / sum;
            }
        }
    }

    // Pass 2: field evaluation, parallel per texel (pure per-element writes).
    parallel_for(int64_t(res) * res, [&](int64_t t) {
        int f = owner[size_t(t)];
        if (f < 0) return;
        const auto& tri = mesh.faces[f];
        Vec3 x = mesh.position(tri[0]) * bary[t * 3] + mesh.position(tri[1]) * bary[t * 3 + 1] +
                 mesh.position(tri[2]) * bary[t * 3 + 2];
        Vec3 c_d, f_s;
        app.eval_base(x, c_d, f_s);
        out.diffuse.set_index(size_t(t), c_d);
        out.specular.set_index(size_t(t), f_s);
        out.mask[size_t(t)] = 1;
    });
    return out;
}

void dilate_seams(Image& tex, std::vector<uint8_t>& mask, int rounds) {
    if (mask.size() != tex.pixel_count())
        throw RuntimeFailure("dilate: mask does not match image");
    int w = tex.width, h = tex.height;
    for (int round = 0; round < rounds; ++round) {
        Image prev = tex;
        std::vector<uint8_t> prev_mask = mask;
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                size_t t = size_t(y) * w + x;
                if (prev_mask[t]) continue;
                Vec3 sum{};
                int count = 0;
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        if (dx == 0 && dy == 0) continue;
                        int nx = x + dx, ny = y + dy;
                        if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
                        if (!prev_mask[size_t(ny) * w + nx]) continue;
                        sum = sum + prev.at(nx, ny);
                        ++count;
                    }
                }
                if (count == 0) continue;
                tex.set(x, y, sum * (1.0 / count));
                mask[t] = 1;
            }
        }
    }
}

Image quantize_image(const Image& img) {
    Image out(img.width, img.height);
    for (size_t i = 0; i < img.rgb.size(); ++i)
        out.rgb[i] = dequantize_u8(quantize_u8(img.rgb[i]));
    return out;
}

std::vector<CascadeMesh> export_cascade(const GeometryField& geo, double iso,
                                        int base_res, double scene_bound) {
    if (base_res < 2) throw InputError("cascade: base resolution must be >= 2");
    int k_max = scene_bound > 1.0 ? static_cast<int>(std::ceil(std::log2(scene_bound))) : 0;
    std::vector<CascadeMesh> regions;
    for (int k = 0; k <= k_max; ++k) {
        int res = std::max(8, base_res >> k);
        double half = static_cast<double>(1 << k);
        DensityVolume vol = sample_density_volume(geo, res, AABB::cube(half));
        TriMesh mesh = marching_cubes(vol, iso);
        if (k >= 1) {
            AABB inner = AABB::cube(static_cast<double>(1 << (k - 1)));
            std::vector<std::array<int, 3>> kept;
            for (const auto& tri : mesh.faces) {
                Vec3 c = (mesh.vertices[tri[0]] + mesh.vertices[tri[1]] + mesh.vertices[tri[2]]) *
                         (1.0 / 3.0);
                if (!inner.contains(c)) kept.push_back(tri);
            }
            std::vector<int> remap(mesh.vertices.size(), -1);
            TriMesh pruned;
            for (auto tri : kept) {
                for (int& v : tri) {
                    if (remap[v] < 0) {
                        remap[v] = static_cast<int>(pruned.vertices.size());
                        pruned.vertices.push_back(mesh.vertices[v]);
                    }
                    v = remap[v];
                }
                pruned.faces.push_back(tri);
            }
            mesh = std::move(pruned);
        }
        regions.push_back({k, std::move(mesh), res});
    }
    return regions;
}

uint64_t fnv1a64_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("checksum: cannot open " + path);
    uint64_t h = 14695981039346656037ull;
    char buf[65536];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        std::streamsize got = in.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ull;
        }
        if (got < static_cast<std::streamsize>(sizeof buf)) break;
    }
    return h;
}

namespace {

std::string hex64(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace

void export_asset(BakedAsset& asset, const std::string& out_dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw RuntimeFailure("export: cannot create " + out_dir + ": " + ec.message());

    json manifest;
    manifest["format"] = "rfmesh-baked-1";
    manifest["view_encoding"] = {{"type", "sh"}, {"dim", asset.sh_dim}};

    json layers = json::array();
    json dims = json::array();
    for (size_t l = 0; l < asset.mlp2.layers.size(); ++l) {
        const auto& layer = asset.mlp2.layers[l];
        if (l == 0) dims.push_back(layer.in);
        dims.push_back(layer.out);
        layers.push_back({{"in", layer.in}, {"out", layer.out}, {"w", layer.w}, {"b", layer.b}});
    }
    manifest["mlp2"] = {{"dims", dims}, {"layers", layers}};

    std::vector<std::string> written;
    json regions = json::array();
    for (BakedRegion& region : asset.regions) {
        std::string base = "region" + std::to_string(region.k);
        region.obj_file = base + ".obj";
        region.mtl_file = base + ".mtl";
        region.diffuse_file = base + "_diffuse.png";
        region.specular_file = base + "_specular.png";
        region.mesh.material = base;
        region.mesh.mtllib = region.mtl_file;

        std::string dir = out_dir + "/";
        save_obj(dir + region.obj_file, region.mesh);
        save_mtl(dir + region.mtl_file, base, region.diffuse_file);
        save_png(dir + region.diffuse_file, region.diffuse);
        save_png(dir + region.specular_file, region.specular);
        for (const std::string& name :
             {region.obj_file, region.mtl_file, region.diffuse_file, region.specular_file})
            written.push_back(name);

        regions.push_back({{"k", region.k},
                           {"resolution", region.resolution},
                           {"obj", region.obj_file},
                           {"mtl", region.mtl_file},
                           {"diffuse", region.diffuse_file},
                           {"specular", region.specular_file}});
    }
    manifest["regions"] = regions;

    json checksums = json::object();
    for (const std::string& name : written)
        checksums[name] = hex64(fnv1a64_file(out_dir + "/" + name));
    manifest["checksums"] = checksums;

    // The manifest lands last: its presence marks a complete export.
    std::ofstream out(out_dir + "/asset.json", std::ios::binary);
    if (!out) throw RuntimeFailure("export: cannot write manifest in " + out_dir);
    out << manifest.dump(2) << "\n";
    out.close();
    if (!out) throw RuntimeFailure("export: manifest write failed in " + out_dir);
}

}  // namespace rfmesh
