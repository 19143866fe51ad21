#pragma once

#include <cstdint>
#include <optional>

#include "symrec/graph.hpp"
#include "symrec/plane.hpp"
#include "symrec/voxgrid.hpp"

namespace symrec {

// out(x) = v(x - 2 (n.x - d) n), sampled trilinearly with zero padding.
Volume reflect(const Volume& v, const Plane& plane);

// 1 - (2 sum(ab) + eps) / (sum(a) + sum(b) + eps), eps = 1e-5.
double dice_loss(const Volume& a, const Volume& b);

// dice_loss(v, reflect(v, plane)).
double symmetry_loss(const Volume& v, const Plane& plane);

namespace graph {

// Plane in the raw form consumed by the reflect op: plane4 = (n, e) with n
// unit length and d = n.anchor + scale * e.
struct PlaneParam {
    Value plane4;
    Vec3 anchor{0.0, 0.0, 0.0};
    double scale = 1.0;
};

Value symmetry_loss(Value vol, const PlaneParam& plane);

// Constant (non-differentiable) PlaneParam for a fixed plane.
PlaneParam constant_plane(Tape& tape, const Plane& plane);

// Reads a PlaneParam's current value back as a canonical Plane.
Plane to_plane(const PlaneParam& p);

}  // namespace graph

struct FitConfig {
    int random_starts = 5;
    // Adds the three principal axes of the foreground as starting normals.
    bool principal_starts = true;
    // Every start first descends on a grid downsampled this many times
    // (factor 2 each) for `screen_iterations` steps at `lr`; the `survivors`
    // best then continue for `iterations` steps at full resolution.
    int coarse_levels = 1;
    // Gaussian smoothing (voxels) of the input before fitting.
    double smoothing_sigma = 0.0;
    int screen_iterations = 40;
    double lr = 0.01;
    int survivors = 2;
    int iterations = 60;
    double fine_lr = 0.005;
    std::uint64_t seed = 7;
    int workers = 1;
    // Starts from the negated orientations (same reflections); used to check
    // that the result does not depend on the sign of the initial normal.
    bool negate_starts = false;
};

struct FitResult {
    Plane plane;
    double sl = 0.0;
    int best_start = -1;
};

// Multi-start AdamW minimization of the symmetry loss over a raw 4-vector
// (a, b, c, e), all starts passing through the foreground centroid: 3
// axis-aligned normals, the principal axes and `random_starts` random
// orientations. Throws on an empty volume.
FitResult fit_plane_direct(const Volume& v, const FitConfig& cfg = {});

// Single-start local refinement from an initial plane at full resolution.
FitResult refit_plane(const Volume& v, const Plane& init, int iterations, double lr);

}  // namespace symrec
