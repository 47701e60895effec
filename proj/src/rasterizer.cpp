#include "rfmesh/rasterizer.hpp"

#include <algorithm>
#include <cmath>

#include "rfmesh/errors.hpp"
#include "rfmesh/parallel.hpp"

namespace rfmesh {

namespace {

constexpr double kNearClip = 1e-6;

// One screen-space triangle. Clipping can split a face in two, so each part
// carries the parent face's barycentrics at its corners; everything the
// fragment needs interpolates from those.
struct RasterTri {
    int face = -1;
    Vec2 p[3];        // pixel coordinates
    double depth[3];  // camera distance, > 0
    Vec3 bary[3];     // parent barycentrics per corner
};

double orient2d(const Vec2& a, const Vec2& b, const Vec2& c) {
    return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

// Tie rule for pixel centers exactly on an edge, phrased for triangles with
// positive orient2d: top edges run left-to-right, left edges run upward.
// Opposite traversals get opposite answers, so neighbors never double-cover.
bool top_left(const Vec2& a, const Vec2& b) {
    double dy = b.y - a.y;
    if (dy != 0.0) return dy < 0.0;
    return b.x - a.x > 0.0;
}

struct ClipVertex {
    Vec3 cam;   // camera-space position
    Vec3 bary;  // parent barycentrics
};

// Camera space -> (pixel coords, positive depth); same mapping as
// CameraModel::project.
void to_screen(const CameraModel& cam, const ClipVertex& v, Vec2& p, double& depth) {
    double inv = 1.0 / (-v.cam.z);
    p = {cam.cx + cam.fx * v.cam.x * inv, cam.cy - cam.fy * v.cam.y * inv};
    depth = -v.cam.z;
}

// Builds the screen triangle list: transform, near-clip, fan, normalize
// winding to positive orientation (two-sided rendering).
std::vector<RasterTri> build_raster_tris(const TriMesh& mesh, const CameraModel& camera) {
    Mat4 w2c = camera.world_to_cam();
    std::vector<RasterTri> tris;
    tris.reserve(mesh.faces.size());
    ClipVertex poly[4], kept[3];
    for (size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& tri = mesh.faces[f];
        int behind = 0;
        for (int c = 0; c < 3; ++c) {
            kept[c].cam = w2c.transform_point(mesh.position(tri[c]));
            kept[c].bary = Vec3{};
            kept[c].bary[c] = 1.0;
            if (kept[c].cam.z > -kNearClip) ++behind;
        }
        if (behind == 3) continue;
        int count = 0;
        if (behind == 0) {
            for (int c = 0; c < 3; ++c) poly[count++] = kept[c];
        } else {
            // Clip against z = -kNearClip; intersection points lie on the 3D
            // segment, so lerped parent barycentrics are exact.
            for (int c = 0; c < 3; ++c) {
                const ClipVertex& cur = kept[c];
                const ClipVertex& nxt = kept[(c + 1) % 3];
                bool cur_in = cur.cam.z <= -kNearClip;
                bool nxt_in = nxt.cam.z <= -kNearClip;
                if (cur_in) poly[count++] = cur;
                if (cur_in != nxt_in) {
                    double t = (-kNearClip - cur.cam.z) / (nxt.cam.z - cur.cam.z);
                    poly[count].cam = cur.cam + (nxt.cam - cur.cam) * t;
                    poly[count].bary = cur.bary + (nxt.bary - cur.bary) * t;
                    ++count;
                }
            }
            if (count < 3) continue;
        }
        for (int k = 2; k < count; ++k) {
            RasterTri rt;
            rt.face = static_cast<int>(f);
            const ClipVertex* corner[3] = {&poly[0], &poly[k - 1], &poly[k]};
            for (int c = 0; c < 3; ++c) {
                to_screen(camera, *corner[c], rt.p[c], rt.depth[c]);
                rt.bary[c] = corner[c]->bary;
            }
            double area = orient2d(rt.p[0], rt.p[1], rt.p[2]);
            if (area == 0.0) continue;  // covers nothing under a strict rule
            if (area < 0.0) {
                std::swap(rt.p[1], rt.p[2]);
                std::swap(rt.depth[1], rt.depth[2]);
                std::swap(rt.bary[1], rt.bary[2]);
            }
            tris.push_back(rt);
        }
    }
    return tris;
}

struct PixelBest {
    double depth = kInf;
    int face = -1;
    int tri = -1;
};

// Rasterizes one triangle into the pixel rectangle [x0,x1) x [y0,y1).
void raster_into(const RasterTri& rt, int ti, int x0, int x1, int y0, int y1, int width,
                 std::vector<PixelBest>& best) {
    double min_u = std::min({rt.p[0].x, rt.p[1].x, rt.p[2].x});
    double max_u = std::max({rt.p[0].x, rt.p[1].x, rt.p[2].x});
    double min_v = std::min({rt.p[0].y, rt.p[1].y, rt.p[2].y});
    double max_v = std::max({rt.p[0].y, rt.p[1].y, rt.p[2].y});
    int bx0 = std::max(x0, static_cast<int>(std::ceil(min_u - 0.5)));
    int bx1 = std::min(x1, static_cast<int>(std::floor(max_u - 0.5)) + 1);
    int by0 = std::max(y0, static_cast<int>(std::ceil(min_v - 0.5)));
    int by1 = std::min(y1, static_cast<int>(std::floor(max_v - 0.5)) + 1);
    double inv_area = 1.0 / orient2d(rt.p[0], rt.p[1], rt.p[2]);
    for (int y = by0; y < by1; ++y) {
        for (int x = bx0; x < bx1; ++x) {
            Vec2 c{x + 0.5, y + 0.5};
            double w0 = orient2d(rt.p[1], rt.p[2], c);
            double w1 = orient2d(rt.p[2], rt.p[0], c);
            double w2 = orient2d(rt.p[0], rt.p[1], c);
            if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;
            if (w0 == 0.0 && !top_left(rt.p[1], rt.p[2])) continue;
            if (w1 == 0.0 && !top_left(rt.p[2], rt.p[0])) continue;
            if (w2 == 0.0 && !top_left(rt.p[0], rt.p[1])) continue;
            // Perspective-correct depth: harmonic mean under screen weights.
            double q0 = w0 * inv_area / rt.depth[0];
            double q1 = w1 * inv_area / rt.depth[1];
            double q2 = w2 * inv_area / rt.depth[2];
            double depth = 1.0 / (q0 + q1 + q2);
            PixelBest& slot = best[size_t(y) * width + x];
            bool wins = depth < slot.depth ||
                        (depth == slot.depth &&
                         (rt.face < slot.face || (rt.face == slot.face && ti < slot.tri)));
            if (wins) slot = {depth, rt.face, ti};
        }
    }
}

}  // namespace

int FragmentBuffer::covered_count() const {
    int n = 0;
    for (const Fragment& f : frags) n += f.face >= 0;
    return n;
}

FragmentBuffer rasterize(const TriMesh& mesh, const CameraModel& camera, int tile_size) {
    camera.validate();
    int tile = std::max(8, tile_size);
    FragmentBuffer buf(camera.width, camera.height);
    std::vector<RasterTri> tris = build_raster_tris(mesh, camera);
    std::vector<PixelBest> best(buf.frags.size());

    // Bin triangles to tiles (serial, ascending order within each bin).
    int tiles_x = (camera.width + tile - 1) / tile;
    int tiles_y = (camera.height + tile - 1) / tile;
    std::vector<std::vector<int>> bins(size_t(tiles_x) * tiles_y);
    for (size_t t = 0; t < tris.size(); ++t) {
        const RasterTri& rt = tris[t];
        double min_u = std::min({rt.p[0].x, rt.p[1].x, rt.p[2].x});
        double max_u = std::max({rt.p[0].x, rt.p[1].x, rt.p[2].x});
        double min_v = std::min({rt.p[0].y, rt.p[1].y, rt.p[2].y});
        double max_v = std::max({rt.p[0].y, rt.p[1].y, rt.p[2].y});
        int tx0 = std::clamp(static_cast<int>(min_u) / tile, 0, tiles_x - 1);
        int tx1 = std::clamp(static_cast<int>(max_u) / tile, 0, tiles_x - 1);
        int ty0 = std::clamp(static_cast<int>(min_v) / tile, 0, tiles_y - 1);
        int ty1 = std::clamp(static_cast<int>(max_v) / tile, 0, tiles_y - 1);
        for (int ty = ty0; ty <= ty1; ++ty)
            for (int tx = tx0; tx <= tx1; ++tx)
                bins[size_t(ty) * tiles_x + tx].push_back(static_cast<int>(t));
    }

    // Tiles own disjoint pixels, so parallel tiles race nowhere; the winner
    // per pixel is order-independent by the (depth, face, subface) key.
    int tile_count = tiles_x * tiles_y;
    parallel_chunks(tile_count, tile_count, [&](int, int tb, int te) {
        for (int t = tb; t < te; ++t) {
            int tx = t % tiles_x, ty = t / tiles_x;
            int x0 = tx * tile, x1 = std::min(camera.width, x0 + tile);
            int y0 = ty * tile, y1 = std::min(camera.height, y0 + tile);
            for (int ti : bins[t])
                raster_into(tris[ti], ti, x0, x1, y0, y1, camera.width, best);
        }
    });

    // Resolve attributes for the winners only.
    parallel_chunks(camera.height, 0, [&](int, int yb, int ye) {
        for (int y = yb; y < ye; ++y) {
            for (int x = 0; x < camera.width; ++x) {
                const PixelBest& slot = best[size_t(y) * camera.width + x];
                if (slot.tri < 0) continue;
                const RasterTri& rt = tris[slot.tri];
                Vec2 c{x + 0.5, y + 0.5};
                double w0 = orient2d(rt.p[1], rt.p[2], c);
                double w1 = orient2d(rt.p[2], rt.p[0], c);
                double w2 = orient2d(rt.p[0], rt.p[1], c);
                double inv_area = 1.0 / orient2d(rt.p[0], rt.p[1], rt.p[2]);
                double q0 = w0 * inv_area / rt.depth[0];
                double q1 = w1 * inv_area / rt.depth[1];
                double q2 = w2 * inv_area / rt.depth[2];
                double denom = q0 + q1 + q2;
                Vec3 b = (rt.bary[0] * q0 + rt.bary[1] * q1 + rt.bary[2] * q2) * (1.0 / denom);
                const auto& tri = mesh.faces[rt.face];
                Fragment& out = buf.at(x, y);
                out.face = rt.face;
                out.b0 = b.x;
                out.b1 = b.y;
                out.b2 = b.z;
                out.x = mesh.position(tri[0]) * b.x + mesh.position(tri[1]) * b.y +
                        mesh.position(tri[2]) * b.z;
                out.depth = slot.depth;
                out.normal = face_normal(mesh, rt.face);
            }
        }
    });
    return buf;
}

Image face_id_map(const FragmentBuffer& frag) {
    Image img(frag.width, frag.height);
    for (size_t i = 0; i < frag.frags.size(); ++i) {
        int f = frag.frags[i].face;
        if (f < 0) continue;
        // f+1 keeps face 0 distinguishable from the black background.
        uint32_t h = (static_cast<uint32_t>(f) + 1u) * 2654435761u;
        img.set_index(i, {((h >> 16) & 0xff) / 255.0, ((h >> 8) & 0xff) / 255.0,
                          (h & 0xff) / 255.0});
    }
    return img;
}

Image depth_map(const FragmentBuffer& frag) {
    double lo = kInf, hi = -kInf;
    for (const Fragment& f : frag.frags) {
        if (f.face < 0) continue;
        lo = std::min(lo, f.depth);
        hi = std::max(hi, f.depth);
    }
    Image img(frag.width, frag.height);
    if (!(lo <= hi)) return img;
    double scale = hi > lo ? 1.0 / (hi - lo) : 0.0;
    for (size_t i = 0; i < frag.frags.size(); ++i) {
        const Fragment& f = frag.frags[i];
        if (f.face < 0) continue;
        double v = hi > lo ? 1.0 - (f.depth - lo) * scale : 1.0;  // near = bright
        img.set_index(i, {v, v, v});
    }
    return img;
}

Image shade(const FragmentBuffer& frag, const AppearanceField& app, const CameraModel& camera,
            const Vec3& background, bool diffuse_only) {
    Image img(frag.width, frag.height, background);
    Vec3 origin = camera.position();
    parallel_chunks(frag.height, 0, [&](int, int yb, int ye) {
        for (int y = yb; y < ye; ++y) {
            for (int x = 0; x < frag.width; ++x) {
                const Fragment& f = frag.at(x, y);
                if (f.face < 0) continue;
                img.set(x, y, app.eval_color(f.x, f.x - origin, diffuse_only));
            }
        }
    });
    return img;
}

void shade_backward(const FragmentBuffer& frag, const Image& dL_dimage, const TriMesh& mesh,
                    const AppearanceField& app, const CameraModel& camera, bool diffuse_only,
                    AppearanceGrad& app_grad, std::vector<Vec3>& dvertex) {
    if (frag.width != dL_dimage.width || frag.height != dL_dimage.height)
        throw RuntimeFailure("shade_backward: buffer and gradient image sizes differ");
    int faces = static_cast<int>(mesh.faces.size());
    for (const Fragment& f : frag.frags)
        if (f.face >= faces) throw RuntimeFailure("shade_backward: buffer face beyond mesh");

    // Reuses a correctly shaped gradient (keeping the caller's vectors stable
    // across steps) and only allocates on first use or a shape change.
    auto mlp_shaped = [](const MlpGrad& g, const FieldMLP& net) {
        if (g.w.size() != net.layers.size() || g.b.size() != net.layers.size()) return false;
        for (size_t l = 0; l < net.layers.size(); ++l)
            if (g.w[l].size() != net.layers[l].w.size() || g.b[l].size() != net.layers[l].b.size())
                return false;
        return true;
    };
    auto shape_grad = [&](AppearanceGrad& g) {
        bool ok = g.grid.values.size() == app.grid.values.size() &&
                  mlp_shaped(g.mlp1, app.mlp1) && mlp_shaped(g.mlp2, app.mlp2);
        for (size_t l = 0; ok && l < g.grid.values.size(); ++l)
            ok = g.grid.values[l].size() == app.grid.values[l].size();
        if (ok) {
            g.zero();
            return;
        }
        g.grid = app.grid.make_grad();
        g.mlp1 = app.mlp1.make_grad();
        g.mlp2 = app.mlp2.make_grad();
    };
    shape_grad(app_grad);
    dvertex.assign(mesh.vertices.size(), Vec3{});
    Vec3 origin = camera.position();

    int workers = worker_count();
    std::vector<AppearanceGrad> wg(workers);
    for (AppearanceGrad& g : wg) shape_grad(g);
    std::vector<std::vector<Vec3>> wv(workers, std::vector<Vec3>(mesh.vertices.size()));

    parallel_chunks(frag.height, 0, [&](int worker, int yb, int ye) {
        AppPointCache cache;
        SpecPointCache scache;
        for (int y = yb; y < ye; ++y) {
            for (int x = 0; x < frag.width; ++x) {
                const Fragment& f = frag.at(x, y);
                if (f.face < 0) continue;
                Vec3 dc = dL_dimage.at(x, y);
                if (dc.x == 0.0 && dc.y == 0.0 && dc.z == 0.0) continue;
                Vec3 c_d, f_s;
                app.eval_base(f.x, c_d, f_s, &cache);
                Vec3 dx{}, dfs{};
                if (!diffuse_only) {
                    app.eval_specular(f_s, f.x - origin, &scache);
                    Vec3 dview{};
                    app.specular_backward(scache, dc, wg[worker], &dfs, &dview);
                    dx += dview;  // view = x - origin chains straight through
                }
                app.base_backward(f.x, cache, dc, dfs, wg[worker], &dx);
                const auto& tri = mesh.faces[f.face];
                wv[worker][tri[0]] += dx * f.b0;
                wv[worker][tri[1]] += dx * f.b1;
                wv[worker][tri[2]] += dx * f.b2;
            }
        }
    });
    for (int w = 0; w < workers; ++w) {
        app_grad.add(wg[w]);
        for (size_t i = 0; i < dvertex.size(); ++i) dvertex[i] += wv[w][i];
    }
}

}  // namespace rfmesh
