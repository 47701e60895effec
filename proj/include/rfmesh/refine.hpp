#pragma once

// Stage-2 optimization: joint training of per-vertex offsets and appearance
// on the rasterized mesh. Rendering errors are accumulated per face and, at
// scheduled points, converted into topology edits: high-error faces are
// midpoint-subdivided, low-error faces are decimated and remeshed.

#include <cstdio>
#include <string>
#include <vector>

#include "rfmesh/dataset.hpp"
#include "rfmesh/fields.hpp"
#include "rfmesh/rasterizer.hpp"
#include "rfmesh/trimesh.hpp"

namespace rfmesh {

// Per-face rendering-error totals since the last reset. Faces never covered
// by any pixel keep count 0; they are excluded from percentile ranking but
// rank as zero-error decimation candidates (invisible faces should shrink).
struct FaceErrorAccumulator {
    std::vector<double> sum;      // summed per-pixel squared color error
    std::vector<int64_t> count;   // pixels accumulated

    void reset(size_t faces) {
        sum.assign(faces, 0.0);
        count.assign(faces, 0);
    }
    size_t faces() const { return sum.size(); }
    bool observed(int f) const { return count[f] > 0; }
    double mean(int f) const { return count[f] > 0 ? sum[f] / double(count[f]) : 0.0; }
};

// Adds each covered pixel's scalar error and a count of 1 to its face bucket.
// per_pixel_error is a row-major scalar image matching the buffer, typically
// |C - C_hat|^2. Plain summation, so any split of the same pixels across
// calls yields identical totals.
void accumulate_face_errors(const FragmentBuffer& frag,
                            const std::vector<double>& per_pixel_error,
                            FaceErrorAccumulator& acc);

// Nearest-rank percentile: the ceil(p/100 * n)-th smallest value (1-indexed),
// rank clamped to [1, n]. values must be non-empty, p in (0, 100].
double percentile_nearest_rank(std::vector<double> values, double p);

struct ErrorThresholds {
    double subdivide = 0.0;  // 95th percentile of observed mean face errors
    double decimate = 0.0;   // 50th percentile
    int observed = 0;        // faces with at least one accumulated pixel
};

// Percentiles over mean errors of observed faces only. observed == 0 means
// nothing was rendered since the last reset; the caller skips the round.
ErrorThresholds compute_thresholds(const FaceErrorAccumulator& acc);

struct Stage2Config {
    int steps = 10000;
    double vertex_lr = 1e-4;
    // The appearance rate continues from where the field training ended and
    // decays exponentially to the floor (equal values = constant).
    double appearance_lr_start = 1e-3;
    double appearance_lr_final = 1e-3;
    double w_smooth = 1e-3;
    double w_offset = 0.1;
    // Refinement runs once per fraction, after floor(f * steps) completed
    // steps. Must be strictly increasing within (0, 1).
    std::vector<double> refine_fractions{0.1, 0.2, 0.3, 0.4, 0.5, 0.7};
    double decimate_fraction = 0.10;   // share of all faces remeshed per round
    double min_edge_frac = 0.01;       // of bbox diagonal: subdivision floor
    double target_edge_frac = 0.02;    // of bbox diagonal: remesh target edge
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.99;
    double adam_eps_grid = 1e-15;
    double adam_eps_mlp = 1e-8;
    double adam_eps_vertex = 1e-8;
    // Only geometry inside this box is refined: faces with centroids outside
    // keep their topology and vertices outside receive no offset updates.
    double center_bound = 1.0;
    int log_interval = 100;
};

struct RefineRound {
    int step = 0;            // completed steps when the round ran
    bool skipped = false;    // no observed faces since the last reset
    double e_subdivide = 0.0;
    double e_decimate = 0.0;
    int observed = 0;
    int faces_before = 0;
    int faces_after = 0;
    int subdivided = 0;           // faces split 1 -> 4
    int decimate_candidates = 0;  // faces handed to the remesher
    std::string to_string() const;
};

// One error-driven topology update. Folds offsets into base positions, then
// subdivides faces with mean error strictly above the subdivide threshold and
// remeshes the lowest-error decimate_fraction of all faces (drawn from those
// strictly below the decimate threshold; unobserved faces count as zero).
// Offsets and the accumulator are reset to zero for the new topology.
// Throws RuntimeFailure if the edited mesh fails the structural audit.
RefineRound refine_topology(TriMesh& mesh, FaceErrorAccumulator& acc, const Stage2Config& cfg);

struct Stage2Report {
    double final_loss = 0.0;
    double final_train_psnr = 0.0;
    std::vector<RefineRound> rounds;
    std::vector<std::string> log_lines;
};

// Per step: renders one training view of the mesh through the rasterizer,
// compares with the reference (background pixels compare against the dataset
// background), and takes an Adam step on vertex offsets and appearance
// parameters of L_render + w_smooth * L_smooth + w_offset * L_offset while
// accumulating per-face errors. Refinement rounds fire per refine_fractions.
// Deterministic for a fixed seed and thread count. mesh and app are updated
// in place. log may be null. Throws RuntimeFailure on a non-finite loss.
Stage2Report train_stage2(const Dataset& ds, const Stage2Config& cfg, uint64_t seed,
                          TriMesh& mesh, AppearanceField& app, std::FILE* log);

}  // namespace rfmesh
