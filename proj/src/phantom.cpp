#include "symrec/phantom.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "symrec/rng.hpp"

namespace symrec {

namespace {

// Smooth random field on the unit sphere with values in [-1, 1]; built from a
// few Gaussian bumps at random directions, so it has no mirror symmetry.
class SphereBumps {
public:
    SphereBumps(std::uint64_t seed, int count) {
        Rng rng(seed);
        for (int k = 0; k < count; ++k) {
            Vec3 d{rng.normal(), rng.normal(), rng.normal()};
            const double n = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
            for (double& c : d) c /= n;
            dirs_.push_back(d);
            amps_.push_back(rng.uniform(-1.0, 1.0));
        }
    }

    double operator()(const Vec3& p) const {
        const double n = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
        if (n == 0.0) return 0.0;
        double acc = 0.0;
        for (std::size_t k = 0; k < dirs_.size(); ++k) {
            const double cosang = (p[0] * dirs_[k][0] + p[1] * dirs_[k][1] + p[2] * dirs_[k][2]) / n;
            acc += amps_[k] * std::exp(-(1.0 - cosang) / 0.25);
        }
        return std::clamp(acc, -1.0, 1.0);
    }

private:
    std::vector<Vec3> dirs_;
    std::vector<double> amps_;
};

using Mat3 = std::array<std::array<double, 3>, 3>;

Mat3 to_mat(const double m[3][3]) {
    Mat3 r{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) r[i][j] = m[i][j];
    return r;
}

Mat3 matmul(const Mat3& a, const Mat3& b) {
    Mat3 r{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) r[i][j] += a[i][k] * b[k][j];
    return r;
}

double det3(const Mat3& m) {
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

Mat3 inverse3(const Mat3& m) {
    const double det = det3(m);
    if (!std::isfinite(det) || std::abs(det) < 1e-12) throw std::invalid_argument("affine: linear part is singular");
    Mat3 r{};
    r[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / det;
    r[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det;
    r[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det;
    r[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / det;
    r[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det;
    r[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det;
    r[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / det;
    r[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det;
    r[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det;
    return r;
}

Mat3 rotation_xyz(const Vec3& deg) {
    const double k = std::numbers::pi / 180.0;
    const double a = deg[0] * k, b = deg[1] * k, c = deg[2] * k;
    const Mat3 rx{{{1, 0, 0}, {0, std::cos(a), -std::sin(a)}, {0, std::sin(a), std::cos(a)}}};
    const Mat3 ry{{{std::cos(b), 0, std::sin(b)}, {0, 1, 0}, {-std::sin(b), 0, std::cos(b)}}};
    const Mat3 rz{{{std::cos(c), -std::sin(c), 0}, {std::sin(c), std::cos(c), 0}, {0, 0, 1}}};
    return matmul(rz, matmul(ry, rx));
}

bool is_binary_skull(const Volume& v) { return v.is_binary() && v.sum() > 0.0; }

}  // namespace

void PhantomSpec::validate() const {
    if (dims.nx < kMinVolumeExtent || dims.ny < kMinVolumeExtent || dims.nz < kMinVolumeExtent) {
        throw std::invalid_argument("phantom: dims must be >= 8 per axis");
    }
    const double rmin = std::min({semi_axes[0], semi_axes[1], semi_axes[2]});
    if (!(thickness > 2.0 && thickness < rmin / 2.0)) {
        throw std::invalid_argument("phantom: thickness must satisfy 2 < t < min(semi_axes)/2");
    }
    if (!(asymmetry >= 0.0 && asymmetry <= 0.1 * thickness)) {
        throw std::invalid_argument("phantom: asymmetry must lie in [0, 0.1 * thickness]");
    }
    if (!(taper >= 0.0 && taper < 0.5)) throw std::invalid_argument("phantom: taper must lie in [0, 0.5)");
    if (!(base_cut > 0.0 && base_cut <= 1.0)) throw std::invalid_argument("phantom: base_cut must lie in (0, 1]");
    if (supersample < 1 || supersample > 8) throw std::invalid_argument("phantom: supersample must lie in [1, 8]");
    if (pose) {
        const Mat3 a = to_mat(pose->linear);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double dot = 0.0;
                for (int k = 0; k < 3; ++k) dot += a[k][i] * a[k][j];
                if (std::abs(dot - (i == j ? 1.0 : 0.0)) > 1e-9 || det3(a) < 0.0) {
                    throw std::invalid_argument("phantom: pose must be a proper rigid transform");
                }
            }
    }
    const Vec3 extent{semi_axes[0] * (1.0 + taper) + asymmetry, semi_axes[1] + asymmetry,
                      semi_axes[2] * (1.0 + taper) + asymmetry};
    const int n[3] = {dims.nx, dims.ny, dims.nz};
    for (int i = 0; i < 3; ++i) {
        if (extent[i] > (n[i] - 1) / 2.0 - 2.0) {
            throw std::invalid_argument("phantom: semi-axes leave less than a 2-voxel margin on axis " +
                                        std::to_string(i));
        }
    }
}

Plane PhantomSpec::symmetry_plane() const {
    const Plane base = Plane::from({1.0, 0.0, 0.0}, (dims.nx - 1) / 2.0);
    if (!pose) return base;
    return transform_plane(base, *pose, {(dims.nx - 1) / 2.0, (dims.ny - 1) / 2.0, (dims.nz - 1) / 2.0});
}

AffineTransform rotation_about(Vec3 axis, double angle_deg, Vec3 translation) {
    const double norm = std::sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]);
    if (!(norm > 0.0)) throw std::invalid_argument("rotation_about: zero axis");
    for (double& c : axis) c /= norm;
    const double th = angle_deg * std::numbers::pi / 180.0;
    const Mat3 k{{{0, -axis[2], axis[1]}, {axis[2], 0, -axis[0]}, {-axis[1], axis[0], 0}}};
    const Mat3 k2 = matmul(k, k);
    AffineTransform t;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) t.linear[i][j] = (i == j ? 1.0 : 0.0) + std::sin(th) * k[i][j] + (1.0 - std::cos(th)) * k2[i][j];
    t.translation = translation;
    return t;
}

PhantomSpec random_phantom_spec(Dims dims, std::uint64_t seed, double asymmetry_ratio) {
    Rng rng(derive_seed(seed, "phantom-spec"));
    const double k = std::min({dims.nx, dims.ny, dims.nz}) / 64.0;
    PhantomSpec spec;
    spec.dims = dims;
    spec.semi_axes = {rng.uniform(16.0, 19.0) * k, rng.uniform(19.5, 22.5) * k, rng.uniform(12.5, 15.0) * k};
    spec.thickness = std::max(2.2, rng.uniform(4.0, 5.0) * k);
    spec.taper = rng.uniform(0.08, 0.16);
    spec.base_cut = rng.uniform(0.35, 0.55);
    spec.asymmetry = asymmetry_ratio * spec.thickness;
    spec.seed = derive_seed(seed, "phantom-bumps");
    return spec;
}

Skull generate_skull(const PhantomSpec& spec) {
    spec.validate();
    const Dims& d = spec.dims;
    const double cx = (d.nx - 1) / 2.0, cy = (d.ny - 1) / 2.0, cz = (d.nz - 1) / 2.0;
    const double rx = spec.semi_axes[0], ry = spec.semi_axes[1], rz = spec.semi_axes[2];
    const double t = spec.thickness;
    const SphereBumps bumps(spec.seed, 6);
    // Rigid inverse: p = A^T (x - c - t).
    Mat3 inv{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
    Vec3 shift{0.0, 0.0, 0.0};
    if (spec.pose) {
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) inv[r][c] = spec.pose->linear[c][r];
        shift = spec.pose->translation;
    }
    const auto in_shell = [&](double px, double py, double pz) {
        const double qx = px - cx - shift[0], qy = py - cy - shift[1], qz = pz - cz - shift[2];
        const double X = inv[0][0] * qx + inv[0][1] * qy + inv[0][2] * qz;
        const double Y = inv[1][0] * qx + inv[1][1] * qy + inv[1][2] * qz;
        const double Z = inv[2][0] * qx + inv[2][1] * qy + inv[2][2] * qz;
        if (Z < -spec.base_cut * rz) return false;
        const double r = std::sqrt(X * X + Y * Y + Z * Z);
        if (r == 0.0) return false;
        const double f = 1.0 + spec.taper * Y / ry;
        const double ax = rx * f, az = rz * f;
        const double rho_out = std::sqrt(X * X / (ax * ax) + Y * Y / (ry * ry) + Z * Z / (az * az));
        const double bx = ax - t, by = ry - t, bz = az - t;
        const double rho_in = std::sqrt(X * X / (bx * bx) + Y * Y / (by * by) + Z * Z / (bz * bz));
        // Surface radii along the ray through the point, shifted by the bump field.
        const double delta = spec.asymmetry > 0.0 ? spec.asymmetry * bumps({X, Y, Z}) : 0.0;
        return r <= r / rho_out + delta && r > r / rho_in + delta;
    };
    const int ss = spec.supersample;
    std::vector<double> offsets(ss);
    for (int k = 0; k < ss; ++k) offsets[k] = (k + 0.5) / ss - 0.5;
    const double weight = 1.0 / (ss * ss * ss);
    std::vector<double> data(d.count(), 0.0);
    std::size_t i = 0;
    for (int z = 0; z < d.nz; ++z)
        for (int y = 0; y < d.ny; ++y)
            for (int x = 0; x < d.nx; ++x, ++i) {
                int hits = 0;
                for (double oz : offsets)
                    for (double oy : offsets)
                        for (double ox : offsets) hits += in_shell(x + ox, y + oy, z + oz);
                data[i] = hits * weight;
            }
    return {Volume(d, std::move(data)), spec.symmetry_plane()};
}

std::string to_string(DefectKind kind) {
    switch (kind) {
        case DefectKind::spherical_cap: return "spherical-cap";
        case DefectKind::box: return "box";
        case DefectKind::frontal: return "symmetry-breaking-frontal";
    }
    return "unknown";
}

DefectKind defect_kind_from_string(const std::string& name) {
    if (name == "spherical-cap") return DefectKind::spherical_cap;
    if (name == "box") return DefectKind::box;
    if (name == "symmetry-breaking-frontal" || name == "frontal") return DefectKind::frontal;
    throw std::invalid_argument("unknown defect kind: " + name);
}

DefectResult insert_defect(const Volume& v, const DefectSpec& spec, const Plane& plane) {
    if (!is_binary_skull(v)) throw std::invalid_argument("insert_defect: input must be a nonempty binary skull");
    const Dims& d = v.dims();
    const Vec3 c = centroid(v);
    Rng rng(derive_seed(spec.seed, "defect-center"));

    Vec3 center{};
    if (spec.center) {
        center = *spec.center;
    } else {
        std::vector<Vec3> candidates;
        for (int z = 0; z < d.nz; ++z)
            for (int y = 0; y < d.ny; ++y)
                for (int x = 0; x < d.nx; ++x) {
                    if (v.at(x, y, z) != 1.0) continue;
                    const Vec3 p{double(x), double(y), double(z)};
                    if (spec.kind == DefectKind::frontal) {
                        // Front of the vault, on the symmetry plane.
                        if (std::abs(plane.signed_distance(p)) <= 0.5 && y < c[1] && z >= c[2]) candidates.push_back(p);
                    } else if (z >= c[2]) {
                        candidates.push_back(p);
                    }
                }
        if (candidates.empty()) throw std::invalid_argument("insert_defect: no admissible defect location");
        center = candidates[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(candidates.size()) - 1))];
        if (spec.kind == DefectKind::frontal) {
            const double s = plane.signed_distance(center);
            for (int k = 0; k < 3; ++k) center[k] -= s * plane.n[k];
        }
    }

    const SphereBumps bumps(derive_seed(spec.seed, "defect-shape"), 5);
    std::vector<double> defective(v.size(), 0.0), implant(v.size(), 0.0);
    bool neg_side = false, pos_side = false;
    std::size_t i = 0;
    for (int z = 0; z < d.nz; ++z)
        for (int y = 0; y < d.ny; ++y)
            for (int x = 0; x < d.nx; ++x, ++i) {
                if (v[i] == 0.0) continue;
                const Vec3 rel{x - center[0], y - center[1], z - center[2]};
                bool in_region = false;
                if (spec.kind == DefectKind::box) {
                    in_region = std::abs(rel[0]) <= spec.size[0] && std::abs(rel[1]) <= spec.size[1] &&
                                std::abs(rel[2]) <= spec.size[2];
                } else {
                    const double radius = spec.size[0] * (1.0 + spec.irregularity * bumps(rel));
                    in_region = rel[0] * rel[0] + rel[1] * rel[1] + rel[2] * rel[2] <= radius * radius;
                }
                if (in_region) {
                    implant[i] = 1.0;
                    const double s = plane.signed_distance({double(x), double(y), double(z)});
                    neg_side = neg_side || s < 0.0;
                    pos_side = pos_side || s > 0.0;
                } else {
                    defective[i] = 1.0;
                }
            }
    if (!neg_side && !pos_side) throw std::invalid_argument("insert_defect: defect region does not intersect the shell");
    if (spec.kind == DefectKind::frontal && !(neg_side && pos_side)) {
        throw std::invalid_argument("insert_defect: frontal defect must straddle the symmetry plane");
    }
    return {Volume(d, std::move(defective), v.spacing()), Volume(d, std::move(implant), v.spacing()), center};
}

double AffineTransform::determinant() const { return det3(to_mat(linear)); }

Volume apply_affine(const Volume& v, const AffineTransform& t) {
    const Mat3 inv = inverse3(to_mat(t.linear));
    const Dims& d = v.dims();
    const Vec3 c = v.center();
    std::vector<double> out(v.size());
    std::size_t i = 0;
    for (int z = 0; z < d.nz; ++z)
        for (int y = 0; y < d.ny; ++y)
            for (int x = 0; x < d.nx; ++x, ++i) {
                const double q[3] = {x - c[0] - t.translation[0], y - c[1] - t.translation[1],
                                     z - c[2] - t.translation[2]};
                const double px = inv[0][0] * q[0] + inv[0][1] * q[1] + inv[0][2] * q[2] + c[0];
                const double py = inv[1][0] * q[0] + inv[1][1] * q[1] + inv[1][2] * q[2] + c[1];
                const double pz = inv[2][0] * q[0] + inv[2][1] * q[1] + inv[2][2] * q[2] + c[2];
                out[i] = sample_trilinear(v, {px, py, pz});
            }
    return Volume(d, std::move(out), v.spacing());
}

Plane transform_plane(const Plane& p, const AffineTransform& t, Vec3 c) {
    const Mat3 a = to_mat(t.linear);
    const Mat3 inv = inverse3(a);
    // Normals map by the inverse transpose.
    Vec3 n{};
    for (int i = 0; i < 3; ++i) n[i] = inv[0][i] * p.n[0] + inv[1][i] * p.n[1] + inv[2][i] * p.n[2];
    const Vec3 q{p.d * p.n[0], p.d * p.n[1], p.d * p.n[2]};
    Vec3 y{};
    for (int i = 0; i < 3; ++i)
        y[i] = a[i][0] * (q[0] - c[0]) + a[i][1] * (q[1] - c[1]) + a[i][2] * (q[2] - c[2]) + c[i] + t.translation[i];
    return Plane::through(n, y);
}

AffineTransform AugmentDraw::transform() const {
    Mat3 f{{{flip[0] ? -1.0 : 1.0, 0, 0}, {0, flip[1] ? -1.0 : 1.0, 0}, {0, 0, flip[2] ? -1.0 : 1.0}}};
    const Mat3 a = matmul(rotation_xyz(angles_deg), f);
    AffineTransform t;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) t.linear[i][j] = scale * a[i][j];
    t.translation = translation;
    return t;
}

AugmentDraw draw_augment(std::uint64_t seed, Dims dims) {
    Rng rng(derive_seed(seed, "augment"));
    AugmentDraw a;
    for (bool& f : a.flip) f = rng.bernoulli(0.5);
    for (double& ang : a.angles_deg) ang = rng.uniform(-kAugmentMaxAngleDeg, kAugmentMaxAngleDeg);
    const int n[3] = {dims.nx, dims.ny, dims.nz};
    for (int i = 0; i < 3; ++i) a.translation[i] = rng.uniform(-kAugmentMaxShift, kAugmentMaxShift) * n[i];
    a.scale = rng.uniform(kAugmentMinScale, kAugmentMaxScale);
    return a;
}

Volume random_augment(const Volume& v, std::uint64_t seed) {
    return apply_affine(v, draw_augment(seed, v.dims()).transform());
}

}  // namespace symrec
