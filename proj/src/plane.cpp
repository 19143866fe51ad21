#include "symrec/plane.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace symrec {

namespace {

double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

}  // namespace

Plane Plane::from(Vec3 normal, double offset) {
    const double norm = std::sqrt(dot(normal, normal));
    if (!std::isfinite(norm) || norm == 0.0 || !std::isfinite(offset)) {
        throw std::invalid_argument("plane: normal must be finite and nonzero");
    }
    Plane p;
    for (int i = 0; i < 3; ++i) p.n[i] = normal[i] / norm;
    p.d = offset / norm;
    for (int i = 0; i < 3; ++i) {
        if (p.n[i] == 0.0) continue;
        if (p.n[i] < 0.0) {
            for (double& c : p.n) c = -c;
            p.d = -p.d;
        }
        break;
    }
    return p;
}

Plane Plane::through(Vec3 normal, Vec3 point) {
    const double norm = std::sqrt(dot(normal, normal));
    if (!std::isfinite(norm) || norm == 0.0) throw std::invalid_argument("plane: normal must be finite and nonzero");
    const Vec3 unit{normal[0] / norm, normal[1] / norm, normal[2] / norm};
    return from(unit, dot(unit, point));
}

double Plane::signed_distance(Vec3 p) const { return dot(n, p) - d; }

Vec3 Plane::reflect(Vec3 p) const {
    const double s = 2.0 * signed_distance(p);
    return {p[0] - s * n[0], p[1] - s * n[1], p[2] - s * n[2]};
}

double angle_between_deg(const Plane& a, const Plane& b) {
    const double c = std::clamp(std::abs(dot(a.n, b.n)), 0.0, 1.0);
    return std::acos(c) * 180.0 / std::numbers::pi;
}

double offset_difference(const Plane& a, const Plane& b) {
    const double sign = dot(a.n, b.n) < 0.0 ? -1.0 : 1.0;
    return std::abs(a.d - sign * b.d);
}

Plane transform_plane(const Plane& p, const double r[3][3], Vec3 c, Vec3 t) {
    Vec3 n{};
    for (int i = 0; i < 3; ++i) n[i] = r[i][0] * p.n[0] + r[i][1] * p.n[1] + r[i][2] * p.n[2];
    // Any point on the plane maps to a point on the image plane.
    const Vec3 q{p.d * p.n[0], p.d * p.n[1], p.d * p.n[2]};
    Vec3 mapped{};
    for (int i = 0; i < 3; ++i) {
        mapped[i] = r[i][0] * (q[0] - c[0]) + r[i][1] * (q[1] - c[1]) + r[i][2] * (q[2] - c[2]) + c[i] + t[i];
    }
    return Plane::through(n, mapped);
}

}  // namespace symrec
