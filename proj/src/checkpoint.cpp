#include "rfmesh/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

#include "rfmesh/errors.hpp"

namespace rfmesh {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'R', 'F', 'M', 'E', 'S', 'H', 'C', 'K'};
constexpr uint32_t kVersion = 1;

json aabb_json(const AABB& b) {
    return json::array({b.lo.x, b.lo.y, b.lo.z, b.hi.x, b.hi.y, b.hi.z});
}

AABB aabb_from(const json& j) {
    return AABB{Vec3{j[0], j[1], j[2]}, Vec3{j[3], j[4], j[5]}};
}

json grid_header(const FeatureGrid& g) {
    json j;
    j["levels"] = g.levels;
    j["channels"] = g.channels;
    j["level_res"] = g.level_res;
    j["domain"] = aabb_json(g.domain);
    return j;
}

json mlp_header(const FieldMLP& net) {
    json dims = json::array();
    dims.push_back(net.layers.front().in);
    for (const auto& l : net.layers) dims.push_back(l.out);
    return dims;
}

void write_doubles(std::ofstream& out, const std::vector<double>& v) {
    out.write(reinterpret_cast<const char*>(v.data()), std::streamsize(v.size() * 8));
}

void read_doubles(std::ifstream& in, std::vector<double>& v, size_t n, const char* what) {
    v.resize(n);
    in.read(reinterpret_cast<char*>(v.data()), std::streamsize(n * 8));
    if (size_t(in.gcount()) != n * 8)
        throw InputError(std::string("checkpoint: truncated reading ") + what);
}

void write_grid(std::ofstream& out, const FeatureGrid& g) {
    for (const auto& lv : g.values) write_doubles(out, lv);
}

void write_mlp(std::ofstream& out, const FieldMLP& net) {
    for (const auto& l : net.layers) {
        write_doubles(out, l.w);
        write_doubles(out, l.b);
    }
}

FeatureGrid read_grid(std::ifstream& in, const json& h) {
    FeatureGrid g;
    g.levels = h.at("levels").get<int>();
    g.channels = h.at("channels").get<int>();
    g.level_res = h.at("level_res").get<std::vector<int>>();
    g.domain = aabb_from(h.at("domain"));
    if (g.levels < 1 || g.channels < 1 || int(g.level_res.size()) != g.levels)
        throw InputError("checkpoint: bad grid header");
    g.values.resize(g.levels);
    for (int l = 0; l < g.levels; ++l) {
        int R = g.level_res[l];
        if (R < 2) throw InputError("checkpoint: bad grid resolution");
        read_doubles(in, g.values[l], size_t(R) * R * R * g.channels, "grid level");
    }
    return g;
}

FieldMLP read_mlp(std::ifstream& in, const json& dims_j) {
    std::vector<int> dims = dims_j.get<std::vector<int>>();
    if (dims.size() < 2) throw InputError("checkpoint: bad mlp dims");
    FieldMLP net;
    for (size_t l = 0; l + 1 < dims.size(); ++l) {
        FieldMLP::Layer layer;
        layer.in = dims[l];
        layer.out = dims[l + 1];
        if (layer.in < 1 || layer.out < 1) throw InputError("checkpoint: bad mlp dims");
        read_doubles(in, layer.w, size_t(layer.in) * layer.out, "mlp weights");
        read_doubles(in, layer.b, size_t(layer.out), "mlp biases");
        net.layers.push_back(std::move(layer));
    }
    return net;
}

}  // namespace

void save_checkpoint(const std::string& path, const GeometryField& geo,
                     const AppearanceField& app, const OccupancyGrid& occ) {
    json h;
    h["geo"] = {{"grid", grid_header(geo.grid)},
                {"mlp", mlp_header(geo.mlp)},
                {"raw_clamp", geo.raw_clamp}};
    h["app"] = {{"grid", grid_header(app.grid)},
                {"mlp1", mlp_header(app.mlp1)},
                {"mlp2", mlp_header(app.mlp2)}};
    h["occ"] = {{"res", occ.res},
                {"box", aabb_json(occ.box)},
                {"decay", occ.decay},
                {"threshold", occ.threshold},
                {"epoch", occ.epoch}};
    std::string header = h.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw RuntimeFailure("checkpoint: cannot write " + path);
    out.write(kMagic, 8);
    uint32_t version = kVersion, hlen = uint32_t(header.size());
    out.write(reinterpret_cast<const char*>(&version), 4);
    out.write(reinterpret_cast<const char*>(&hlen), 4);
    out.write(header.data(), std::streamsize(header.size()));

    write_grid(out, geo.grid);
    write_mlp(out, geo.mlp);
    write_grid(out, app.grid);
    write_mlp(out, app.mlp1);
    write_mlp(out, app.mlp2);
    write_doubles(out, occ.running);
    if (!out) throw RuntimeFailure("checkpoint: write failed for " + path);
}

void load_checkpoint(const std::string& path, GeometryField& geo, AppearanceField& app,
                     OccupancyGrid& occ) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("checkpoint: cannot open " + path);

    char magic[8];
    in.read(magic, 8);
    if (in.gcount() != 8 || std::memcmp(magic, kMagic, 8) != 0)
        throw InputError("checkpoint: bad magic in " + path);
    uint32_t version = 0, hlen = 0;
    in.read(reinterpret_cast<char*>(&version), 4);
    in.read(reinterpret_cast<char*>(&hlen), 4);
    if (!in || version != kVersion) throw InputError("checkpoint: unsupported version");
    if (hlen > 1 << 20) throw InputError("checkpoint: oversized header");
    std::string header(hlen, '\0');
    in.read(header.data(), hlen);
    if (size_t(in.gcount()) != hlen) throw InputError("checkpoint: truncated header");

    json h;
    try {
        h = json::parse(header);
    } catch (const json::exception& e) {
        throw InputError(std::string("checkpoint: malformed header: ") + e.what());
    }

    try {
        geo.grid = read_grid(in, h.at("geo").at("grid"));
        geo.mlp = read_mlp(in, h.at("geo").at("mlp"));
        geo.raw_clamp = h.at("geo").at("raw_clamp").get<double>();
        if (geo.mlp.input_dim() != geo.grid.encoding_dim() || geo.mlp.output_dim() != 1)
            throw InputError("checkpoint: geometry shapes disagree");

        app.grid = read_grid(in, h.at("app").at("grid"));
        app.mlp1 = read_mlp(in, h.at("app").at("mlp1"));
        app.mlp2 = read_mlp(in, h.at("app").at("mlp2"));
        if (app.mlp1.input_dim() != app.grid.encoding_dim() || app.mlp1.output_dim() != 6 ||
            app.mlp2.input_dim() != 3 + kShDim || app.mlp2.output_dim() != 3)
            throw InputError("checkpoint: appearance shapes disagree");

        const json& o = h.at("occ");
        occ.res = o.at("res").get<int>();
        occ.box = aabb_from(o.at("box"));
        occ.decay = o.at("decay").get<double>();
        occ.threshold = o.at("threshold").get<double>();
        occ.epoch = o.at("epoch").get<int64_t>();
        if (occ.res < 1) throw InputError("checkpoint: bad occupancy res");
        read_doubles(in, occ.running, size_t(occ.res) * occ.res * occ.res, "occupancy");
        occ.refresh_mask();
    } catch (const json::exception& e) {
        throw InputError(std::string("checkpoint: malformed header: ") + e.what());
    }

    char extra;
    in.read(&extra, 1);
    if (!in.eof()) throw InputError("checkpoint: trailing bytes in " + path);
}

}  // namespace rfmesh
