#include "rfmesh/mesh_clean.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <unordered_map>
#include <unordered_set>

#include "rfmesh/bvh.hpp"
#include "rfmesh/parallel.hpp"

namespace rfmesh {

VisibilityReport visibility_cull(TriMesh& mesh, const std::vector<CameraModel>& cameras,
                                 int dilation_rounds) {
    VisibilityReport report;
    report.faces_before = static_cast<int>(mesh.faces.size());
    if (cameras.empty()) {
        report.no_cameras = true;
        return report;
    }
    if (mesh.faces.empty()) return report;

    Bvh bvh = Bvh::build(mesh);
    int m = static_cast<int>(mesh.faces.size());
    std::vector<char> visible(m, 0);
    int workers = worker_count();
    std::vector<std::vector<char>> partial(workers);

    for (const CameraModel& cam : cameras) {
        for (auto& p : partial) p.assign(m, 0);
        parallel_chunks(cam.height, 0, [&](int worker, int y0, int y1) {
            std::vector<char>& mark = partial[worker];
            for (int y = y0; y < y1; ++y) {
                for (int x = 0; x < cam.width; ++x) {
                    BvhHit hit;
                    if (bvh.first_hit(cam.pixel_ray(x, y), hit)) mark[hit.face] = 1;
                }
            }
        });
        for (int w = 0; w < workers; ++w)
            for (int f = 0; f < m; ++f) visible[f] |= partial[w][f];
    }

    if (dilation_rounds > 0) {
        auto ef = edge_faces(mesh);
        std::vector<std::vector<int>> face_nbr(m);
        for (const auto& kv : ef) {
            const auto& list = kv.second;
            for (size_t i = 0; i < list.size(); ++i)
                for (size_t j = 0; j < list.size(); ++j)
                    if (i != j) face_nbr[list[i]].push_back(list[j]);
        }
        for (int round = 0; round < dilation_rounds; ++round) {
            std::vector<char> next = visible;
            for (int f = 0; f < m; ++f) {
                if (!visible[f]) continue;
                for (int g : face_nbr[f]) next[g] = 1;
            }
            visible.swap(next);
        }
    }

    std::vector<std::array<int, 3>> kept;
    kept.reserve(m);
    for (int f = 0; f < m; ++f)
        if (visible[f]) kept.push_back(mesh.faces[f]);
    report.faces_removed = m - static_cast<int>(kept.size());
    mesh.faces = std::move(kept);
    remove_unreferenced_vertices(mesh);
    return report;
}

std::string CleanReport::to_string() const {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "clean: merged=%d degenerate=%d duplicate=%d nonmanifold=%d fan_splits=%d "
                  "floater_faces=%d unreferenced=%d",
                  merged_vertices, degenerate_faces_removed, duplicate_faces_removed,
                  nonmanifold_faces_removed, split_fan_vertices, floater_faces_removed,
                  unreferenced_vertices_removed);
    return buf;
}

namespace {

// Spatial-hash merge: each vertex maps to the first earlier vertex within
// eps, scanning the 27 neighboring cells. First-come representatives keep
// their exact coordinates.
int merge_close_vertices(TriMesh& mesh, double eps, std::vector<int>& remap) {
    int n = static_cast<int>(mesh.vertices.size());
    remap.resize(n);
    if (eps <= 0.0 || n == 0) {
        for (int i = 0; i < n; ++i) remap[i] = i;
        return 0;
    }
    double cell = eps;
    auto cell_key = [cell](const Vec3& p) {
        auto q = [cell](double v) { return static_cast<int64_t>(std::floor(v / cell)); };
        uint64_t h = 0xcbf29ce484222325ull;
        for (int64_t c : {q(p.x), q(p.y), q(p.z)}) {
            h ^= static_cast<uint64_t>(c);
            h *= 0x100000001b3ull;
            h ^= h >> 31;
        }
        return h;
    };
    std::unordered_map<uint64_t, std::vector<int>> grid;
    grid.reserve(n);
    int merged = 0;
    double eps2 = eps * eps;
    for (int i = 0; i < n; ++i) {
        Vec3 p = mesh.position(i);
        int rep = -1;
        for (int dz = -1; dz <= 1 && rep < 0; ++dz)
            for (int dy = -1; dy <= 1 && rep < 0; ++dy)
                for (int dx = -1; dx <= 1 && rep < 0; ++dx) {
                    Vec3 probe{p.x + dx * cell, p.y + dy * cell, p.z + dz * cell};
                    auto it = grid.find(cell_key(probe));
                    if (it == grid.end()) continue;
                    for (int j : it->second) {
                        Vec3 d = mesh.position(j) - p;
                        if (dot(d, d) <= eps2) {
                            rep = j;
                            break;
                        }
                    }
                }
        if (rep >= 0) {
            remap[i] = rep;
            ++merged;
        } else {
            remap[i] = i;
            grid[cell_key(p)].push_back(i);
        }
    }
    if (merged) {
        for (auto& tri : mesh.faces)
            for (int c = 0; c < 3; ++c) tri[c] = remap[tri[c]];
    }
    return merged;
}

}  // namespace

CleanReport clean_mesh(TriMesh& mesh, const CleanConfig& cfg) {
    CleanReport report;
    double diag = mesh.vertices.empty() ? 0.0 : mesh_bounds(mesh).diagonal();
    double eps = cfg.merge_eps < 0.0 ? 1e-5 * diag : cfg.merge_eps;
    double min_diameter =
        cfg.min_component_diameter < 0.0 ? 0.02 * diag : cfg.min_component_diameter;

    std::vector<int> remap;
    report.merged_vertices = merge_close_vertices(mesh, eps, remap);

    // Degenerate and exact-duplicate faces. Area floor is relative: genuine
    // faces live far above 1e-16 of the squared diagonal.
    double area_floor = 1e-16 * diag * diag;
    struct TripleHash {
        size_t operator()(const std::array<int, 3>& t) const {
            uint64_t h = 0x9e3779b97f4a7c15ull;
            for (int v : t) {
                h ^= static_cast<uint64_t>(static_cast<uint32_t>(v));
                h *= 0xbf58476d1ce4e5b9ull;
                h ^= h >> 29;
            }
            return static_cast<size_t>(h);
        }
    };
    std::unordered_set<std::array<int, 3>, TripleHash> seen;
    seen.reserve(mesh.faces.size());
    {
        std::vector<std::array<int, 3>> kept;
        kept.reserve(mesh.faces.size());
        for (size_t f = 0; f < mesh.faces.size(); ++f) {
            const auto& tri = mesh.faces[f];
            if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2]) {
                ++report.degenerate_faces_removed;
                continue;
            }
            Vec3 a = mesh.position(tri[0]);
            double area =
                0.5 * norm(cross(mesh.position(tri[1]) - a, mesh.position(tri[2]) - a));
            if (area <= area_floor) {
                ++report.degenerate_faces_removed;
                continue;
            }
            std::array<int, 3> sorted{tri[0], tri[1], tri[2]};
            std::sort(sorted.begin(), sorted.end());
            if (!seen.insert(sorted).second) {
                ++report.duplicate_faces_removed;
                continue;
            }
            kept.push_back(tri);
        }
        mesh.faces = std::move(kept);
    }

    // Non-manifold edge repair: delete the smallest-area face on any edge
    // carrying more than two, repeating until none remain. Edge keys are
    // processed in sorted order for determinism.
    for (;;) {
        auto ef = edge_faces(mesh);
        std::vector<uint64_t> bad;
        for (const auto& kv : ef)
            if (kv.second.size() > 2) bad.push_back(kv.first);
        if (bad.empty()) break;
        std::sort(bad.begin(), bad.end());
        std::vector<char> dead(mesh.faces.size(), 0);
        for (uint64_t key : bad) {
            auto& list = ef[key];
            std::vector<int> alive;
            for (int f : list)
                if (!dead[f]) alive.push_back(f);
            while (alive.size() > 2) {
                int victim = alive[0];
                double best = face_area(mesh, victim);
                for (int f : alive) {
                    double area = face_area(mesh, f);
                    if (area < best || (area == best && f < victim)) {
                        best = area;
                        victim = f;
                    }
                }
                dead[victim] = 1;
                ++report.nonmanifold_faces_removed;
                alive.erase(std::find(alive.begin(), alive.end(), victim));
            }
        }
        std::vector<std::array<int, 3>> kept;
        kept.reserve(mesh.faces.size());
        for (size_t f = 0; f < mesh.faces.size(); ++f)
            if (!dead[f]) kept.push_back(mesh.faces[f]);
        mesh.faces = std::move(kept);
    }

    // Non-manifold vertex repair: a vertex whose incident faces form more
    // than one edge-connected fan is duplicated, one copy per extra fan.
    {
        auto vf = vertex_faces(mesh);
        int n = static_cast<int>(mesh.vertices.size());
        bool has_off = mesh.has_offsets();
        for (int v = 0; v < n; ++v) {
            const auto& incident = vf[v];
            if (incident.size() < 2) continue;
            // Union-find over the incident faces, joined via shared edges at v.
            std::unordered_map<int, int> slot;
            for (size_t i = 0; i < incident.size(); ++i) slot[incident[i]] = static_cast<int>(i);
            std::vector<int> parent(incident.size());
            for (size_t i = 0; i < incident.size(); ++i) parent[i] = static_cast<int>(i);
            std::function<int(int)> find = [&](int x) {
                while (parent[x] != x) x = parent[x] = parent[parent[x]];
                return x;
            };
            std::unordered_map<int, int> other_to_face;  // neighbor vertex -> first face slot
            for (size_t i = 0; i < incident.size(); ++i) {
                const auto& tri = mesh.faces[incident[i]];
                for (int c = 0; c < 3; ++c) {
                    if (tri[c] != v) continue;
                    int nb[2] = {tri[(c + 1) % 3], tri[(c + 2) % 3]};
                    for (int w : nb) {
                        auto it = other_to_face.find(w);
                        if (it == other_to_face.end()) {
                            other_to_face.emplace(w, static_cast<int>(i));
                        } else {
                            int ra = find(it->second), rb = find(static_cast<int>(i));
                            if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
                        }
                    }
                }
            }
            std::map<int, int> fan_vertex;  // root slot -> vertex id for that fan
            for (size_t i = 0; i < incident.size(); ++i) {
                int root = find(static_cast<int>(i));
                auto it = fan_vertex.find(root);
                int target;
                if (it == fan_vertex.end()) {
                    target = fan_vertex.empty() ? v : static_cast<int>(mesh.vertices.size());
                    if (target != v) {
                        mesh.vertices.push_back(mesh.vertices[v]);
                        if (has_off) mesh.offsets.push_back(mesh.offsets[v]);
                        ++report.split_fan_vertices;
                    }
                    fan_vertex.emplace(root, target);
                } else {
                    target = it->second;
                }
                if (target != v) {
                    auto& tri = mesh.faces[incident[i]];
                    for (int c = 0; c < 3; ++c)
                        if (tri[c] == v) tri[c] = target;
                }
            }
        }
    }

    // Floater components: connected via shared edges; removed only when both
    // smaller than min_component_faces and tighter than min_diameter.
    if (!mesh.faces.empty()) {
        int m = static_cast<int>(mesh.faces.size());
        std::vector<int> parent(m);
        for (int f = 0; f < m; ++f) parent[f] = f;
        std::function<int(int)> find = [&](int x) {
            while (parent[x] != x) x = parent[x] = parent[parent[x]];
            return x;
        };
        auto ef = edge_faces(mesh);
        for (const auto& kv : ef) {
            const auto& list = kv.second;
            for (size_t i = 1; i < list.size(); ++i) {
                int ra = find(list[0]), rb = find(list[i]);
                if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
            }
        }
        std::unordered_map<int, int> comp_faces;
        std::unordered_map<int, AABB> comp_box;
        for (int f = 0; f < m; ++f) {
            int root = find(f);
            comp_faces[root] += 1;
            AABB& box = comp_box[root];
            for (int c = 0; c < 3; ++c) box.expand(mesh.position(mesh.faces[f][c]));
        }
        std::unordered_set<int> drop;
        for (const auto& kv : comp_faces) {
            if (kv.second < cfg.min_component_faces &&
                comp_box[kv.first].diagonal() < min_diameter)
                drop.insert(kv.first);
        }
        if (!drop.empty()) {
            std::vector<std::array<int, 3>> kept;
            kept.reserve(mesh.faces.size());
            for (int f = 0; f < m; ++f) {
                if (drop.count(find(f)))
                    ++report.floater_faces_removed;
                else
                    kept.push_back(mesh.faces[f]);
            }
            mesh.faces = std::move(kept);
        }
    }

    report.unreferenced_vertices_removed = remove_unreferenced_vertices(mesh);
    return report;
}

}  // namespace rfmesh
