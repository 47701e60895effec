#pragma once

// Stage-1 optimization: fits the geometry and appearance fields to the posed
// images by stochastic ray sampling. Batches target a fixed point budget per
// step; the ray count adapts through a running samples-per-ray average.

#include <cstdio>
#include <string>
#include <vector>

#include "rfmesh/dataset.hpp"
#include "rfmesh/fields.hpp"
#include "rfmesh/occupancy.hpp"

namespace rfmesh {

struct Stage1Config {
    int steps = 30000;
    int points_per_step = 1 << 18;
    int max_samples_per_ray = 128;
    double lr_start = 1e-2;
    double lr_final = 1e-3;
    int diffuse_only_steps = 1000;  // specular head disabled for the first steps
    double w_specular = 0.0;
    double w_entropy = 0.0;
    double w_tv = 0.0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.99;
    double adam_eps_grid = 1e-15;
    double adam_eps_mlp = 1e-8;
    int occ_res = 128;
    int occ_interval = 16;
    double occ_decay = 0.95;
    // Color evaluation is skipped where the quadrature weight is at or below
    // this value (the sample still contributes through its density; its color
    // is taken as the background). 0 evaluates everything.
    double min_color_weight = 1e-4;
    int log_interval = 100;
};

struct Stage1Report {
    double final_loss = 0.0;
    double final_train_psnr = 0.0;
    int64_t total_rays = 0;
    int64_t total_samples = 0;
    std::vector<std::string> log_lines;
};

// geo/app/occ must be freshly constructed for the dataset's domain; they are
// trained in place. log may be null.
Stage1Report train_stage1(const Dataset& ds, const Stage1Config& cfg, uint64_t seed,
                          GeometryField& geo, AppearanceField& app, OccupancyGrid& occ,
                          std::FILE* log);

// Exponential decay from lr_start to lr_final across `steps` steps.
double lr_schedule(double lr_start, double lr_final, int step, int steps);

}  // namespace rfmesh
