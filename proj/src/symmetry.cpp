#include "symrec/symmetry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "symrec/optim.hpp"
#include "symrec/parallel.hpp"
#include "symrec/rng.hpp"

namespace symrec {

Volume reflect(const Volume& v, const Plane& plane) {
    graph::Tape tape;
    const auto vol = tape.constant(v);
    const auto p = graph::constant_plane(tape, plane);
    const auto out = graph::reflect(vol, p.plane4, p.anchor, p.scale);
    return Volume(v.dims(), std::vector<double>(out.data().begin(), out.data().end()), v.spacing());
}

double dice_loss(const Volume& a, const Volume& b) {
    require_same_grid(a, b, "dice_loss");
    graph::Tape tape;
    return graph::dice_loss(tape.constant(a), tape.constant(b)).item();
}

double symmetry_loss(const Volume& v, const Plane& plane) {
    graph::Tape tape;
    return graph::symmetry_loss(tape.constant(v), graph::constant_plane(tape, plane)).item();
}

namespace graph {

Value symmetry_loss(Value vol, const PlaneParam& plane) {
    return dice_loss(vol, reflect(vol, plane.plane4, plane.anchor, plane.scale));
}

PlaneParam constant_plane(Tape& tape, const Plane& plane) {
    return {tape.constant(Shape::vector(4), {plane.n[0], plane.n[1], plane.n[2], plane.d}), {0.0, 0.0, 0.0}, 1.0};
}

Plane to_plane(const PlaneParam& p) {
    const auto v = p.plane4.data();
    const Vec3 n{v[0], v[1], v[2]};
    const double norm = std::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]);
    const Vec3 unit{n[0] / norm, n[1] / norm, n[2] / norm};
    const double d = unit[0] * p.anchor[0] + unit[1] * p.anchor[1] + unit[2] * p.anchor[2] + p.scale * v[3];
    return Plane::from(unit, d);
}

}  // namespace graph

namespace {

// Eigenvectors of the foreground's second-moment matrix about its centroid.
std::array<Vec3, 3> principal_axes(const Volume& v) {
    const Vec3 c = centroid(v);
    Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
    const Dims& d = v.dims();
    std::size_t i = 0;
    for (int z = 0; z < d.nz; ++z)
        for (int y = 0; y < d.ny; ++y)
            for (int x = 0; x < d.nx; ++x, ++i) {
                const double w = v[i];
                if (w == 0.0) continue;
                const Eigen::Vector3d r(x - c[0], y - c[1], z - c[2]);
                m += w * r * r.transpose();
            }
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(m);
    std::array<Vec3, 3> axes{};
    for (int k = 0; k < 3; ++k) {
        const Eigen::Vector3d e = solver.eigenvectors().col(k);
        axes[k] = Plane::from({e[0], e[1], e[2]}, 0.0).n;
    }
    return axes;
}

// Voxel i of a 2x-downsampled grid covers fine voxels 2i, 2i+1, so fine
// coordinates are x_f = 2 x_c + 0.5.
Plane plane_to_finer(const Plane& p) {
    return Plane::from(p.n, 2.0 * p.d + 0.5 * (p.n[0] + p.n[1] + p.n[2]));
}

struct StartResult {
    Plane plane;
    double sl = std::numeric_limits<double>::infinity();
};

// AdamW on raw (a, b, c, e) with d = n.anchor + e; keeps the best iterate.
// Can be advanced in several chunks without changing the trajectory.
class Descent {
public:
    Descent(const Volume& v, Vec3 anchor, std::array<double, 4> raw, double lr)
        : v_(&v), anchor_(anchor), params_(raw.begin(), raw.end()), lr_(lr) {}

    void run(int iterations) {
        for (int it = 0; it < iterations; ++it) step(true);
    }

    // Scores the current parameters without updating them.
    void finish() { step(false); }

    const StartResult& best() const { return best_; }

private:
    void step(bool update) {
        graph::Tape tape;
        const auto vol = tape.constant(*v_);
        const auto p = tape.leaf(graph::Shape::vector(4), params_);
        const graph::PlaneParam plane{graph::vec_normalize(p), anchor_, 1.0};
        const auto sl = graph::symmetry_loss(vol, plane);
        if (sl.item() < best_.sl) {
            best_.sl = sl.item();
            best_.plane = graph::to_plane(plane);
        }
        if (!update) return;
        tape.backward(sl);
        adamw_step(params_, tape.grad(p), state_, lr_, 0.0);
        // The loss only sees the direction of (a, b, c); keeping it unit
        // length stops Adam from inflating the norm and shrinking its steps.
        const double norm = std::sqrt(params_[0] * params_[0] + params_[1] * params_[1] + params_[2] * params_[2]);
        if (norm > 0.0)
            for (int k = 0; k < 3; ++k) params_[k] /= norm;
    }

    const Volume* v_;
    Vec3 anchor_;
    std::vector<double> params_;
    double lr_;
    AdamWState state_;
    StartResult best_;
};

StartResult descend(const Volume& v, Vec3 anchor, std::array<double, 4> raw, int iterations, double lr) {
    Descent d(v, anchor, raw, lr);
    d.run(iterations);
    d.finish();
    return d.best();
}

std::array<double, 4> raw_from_plane(const Plane& p, Vec3 anchor) {
    const double e = p.d - (p.n[0] * anchor[0] + p.n[1] * anchor[1] + p.n[2] * anchor[2]);
    return {p.n[0], p.n[1], p.n[2], e};
}

}  // namespace

FitResult fit_plane_direct(const Volume& input, const FitConfig& cfg) {
    if (!(input.sum() > 0.0)) throw std::invalid_argument("fit_plane_direct: empty foreground");
    const Volume v = gaussian_blur(input, cfg.smoothing_sigma);
    if (cfg.coarse_levels < 0) throw std::invalid_argument("fit_plane_direct: coarse_levels must be >= 0");

    Volume search = v;
    int levels = 0;
    while (levels < cfg.coarse_levels && search.dims().nx % 2 == 0 && search.dims().ny % 2 == 0 &&
           search.dims().nz % 2 == 0 && search.dims().nx / 2 >= kMinVolumeExtent &&
           search.dims().ny / 2 >= kMinVolumeExtent && search.dims().nz / 2 >= kMinVolumeExtent) {
        search = downsample2(search);
        ++levels;
    }
    const Vec3 anchor = centroid(search);

    std::vector<std::array<double, 4>> starts = {{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}};
    if (cfg.principal_starts)
        for (const Vec3& axis : principal_axes(v)) starts.push_back({axis[0], axis[1], axis[2], 0.0});
    Rng rng(cfg.seed);
    for (int i = 0; i < cfg.random_starts; ++i) {
        std::array<double, 4> s{rng.normal(), rng.normal(), rng.normal(), 0.0};
        const double norm = std::sqrt(s[0] * s[0] + s[1] * s[1] + s[2] * s[2]);
        for (int k = 0; k < 3; ++k) s[k] /= norm;
        starts.push_back(s);
    }
    if (cfg.negate_starts)
        for (auto& s : starts)
            for (double& c : s) c = -c;

    // Screening: every start descends on the search grid; the outcome and the
    // start itself are then scored at full resolution, where the loss is
    // better conditioned, and the lower of the two is kept as candidate.
    const Vec3 fine_anchor = centroid(v);
    std::vector<StartResult> screened(starts.size());
    parallel_for(starts.size(), cfg.workers, [&](std::size_t i) {
        Descent d(search, anchor, starts[i], cfg.lr);
        d.run(cfg.screen_iterations);
        d.finish();
        Plane plane = d.best().plane;
        for (int l = 0; l < levels; ++l) plane = plane_to_finer(plane);
        const auto& s = starts[i];
        const Vec3 n{s[0], s[1], s[2]};
        const Plane initial = Plane::from(n, n[0] * fine_anchor[0] + n[1] * fine_anchor[1] + n[2] * fine_anchor[2]);
        const double sl_descended = symmetry_loss(v, plane);
        const double sl_initial = symmetry_loss(v, initial);
        screened[i] = sl_initial < sl_descended ? StartResult{initial, sl_initial} : StartResult{plane, sl_descended};
    });

    // Ties resolve to the earliest start so the choice is deterministic.
    std::vector<std::size_t> order(starts.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return screened[a].sl < screened[b].sl; });
    order.resize(std::min<std::size_t>(order.size(), static_cast<std::size_t>(std::max(1, cfg.survivors))));
    std::sort(order.begin(), order.end());

    // Survivors continue at full resolution.
    std::vector<StartResult> finals(order.size());
    parallel_for(order.size(), cfg.workers, [&](std::size_t k) {
        Descent d(v, fine_anchor, raw_from_plane(screened[order[k]].plane, fine_anchor), cfg.fine_lr);
        d.run(cfg.iterations);
        d.finish();
        finals[k] = d.best();
    });

    std::size_t best = 0;
    for (std::size_t k = 1; k < finals.size(); ++k)
        if (finals[k].sl < finals[best].sl) best = k;
    return {finals[best].plane, finals[best].sl, static_cast<int>(order[best])};
}

FitResult refit_plane(const Volume& v, const Plane& init, int iterations, double lr) {
    if (!(v.sum() > 0.0)) throw std::invalid_argument("refit_plane: empty foreground");
    const Vec3 anchor = centroid(v);
    const auto r = descend(v, anchor, raw_from_plane(init, anchor), iterations, lr);
    return {r.plane, r.sl, 0};
}

}  // namespace symrec
