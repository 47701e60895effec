#pragma once

// Volume rendering along rays: stratified occupancy-pruned sampling, emission-
// absorption compositing with an analytic backward pass, and the training
// losses defined on ray batches.

#include <vector>

#include "rfmesh/camera.hpp"
#include "rfmesh/fields.hpp"
#include "rfmesh/image.hpp"
#include "rfmesh/occupancy.hpp"
#include "rfmesh/rng.hpp"

namespace rfmesh {

struct RaySample {
    double t = 0.0;
    double delta = 0.0;
    Vec3 x;
};

// Stratified sampling of [near, far] into max_samples equal strata, one
// candidate per stratum (centered when rng is null, else jittered). Candidates
// in unoccupied cells are dropped. delta is the distance to the next kept
// sample; the last kept sample extends to far but never below one stratum
// width. Appends to out, returns the number of kept samples.
int sample_along_ray(const Ray& ray, double near, double far, int max_samples,
                     const OccupancyGrid* occ, Rng* rng, std::vector<RaySample>& out);

struct QuadratureResult {
    Vec3 color;
    double opacity = 0.0;  // 1 - transmittance past the last sample
};

// C = sum_i T_i alpha_i c_i + (1 - sum_i T_i alpha_i) * background with
// alpha_i = 1 - exp(-sigma_i delta_i), T_i = prod_{j<i} (1 - alpha_j).
// weights, when non-null, receives the n values T_i alpha_i.
QuadratureResult composite_ray(const double* sigma, const Vec3* color, const double* delta,
                               int n, const Vec3& background, double* weights = nullptr);

// Exact gradients of the compositing above. dsigma/dcolor are written (not
// accumulated) and must hold n entries.
void composite_ray_backward(const double* sigma, const Vec3* color, const double* delta, int n,
                            const Vec3& background, const Vec3& dL_dcolor, double dL_dopacity,
                            double* dsigma, Vec3* dcolor);

// Mean over rays of the squared color error.
double loss_render(const std::vector<Vec3>& pred, const std::vector<Vec3>& gt);

// Mean over samples of the squared specular color norm.
double loss_specular_l2(const std::vector<Vec3>& c_s);

// Mean over samples of the binary entropy of alpha, with 0 log 0 = 0.
double loss_entropy(const std::vector<double>& alpha);
double entropy_term(double alpha);
// d(entropy_term)/d(alpha); 0 at the endpoints.
double entropy_term_grad(double alpha);

// Mean of squared differences between adjacent lattice values, over all
// levels, axes, and channels. grad, when non-null, is accumulated into.
double loss_total_variation(const FeatureGrid& grid, GridGrad* grad);

// Full-image volume rendering (for PSNR checks and debugging). Colors are
// clamped to [0,1] on output.
Image render_view(const GeometryField& geo, const AppearanceField& app,
                  const OccupancyGrid* occ, const CameraModel& cam, const AABB& domain,
                  const Vec3& background, int max_samples, bool diffuse_only = false);

}  // namespace rfmesh
