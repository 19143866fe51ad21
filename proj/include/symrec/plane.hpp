#pragma once

#include "symrec/voxgrid.hpp"

namespace symrec {

// Reflection plane {x : n.x = d} in voxel coordinates, with unit normal n.
// A plane and its negation describe the same reflection, so instances are
// kept in canonical orientation: the first nonzero component of n is positive.
struct Plane {
    Vec3 n{1.0, 0.0, 0.0};
    double d = 0.0;

    // Normalizes and canonicalizes; throws on a zero or non-finite normal.
    static Plane from(Vec3 normal, double offset);
    // Plane with the given normal passing through point p.
    static Plane through(Vec3 normal, Vec3 p);

    double signed_distance(Vec3 p) const;
    Vec3 reflect(Vec3 p) const;
};

// Angle between the two normals in degrees, ignoring orientation (0..90).
double angle_between_deg(const Plane& a, const Plane& b);

// |d_a - d_b| after aligning the orientation of b's normal with a's.
double offset_difference(const Plane& a, const Plane& b);

// Plane image under x -> R (x - c) + c + t.
Plane transform_plane(const Plane& p, const double rotation[3][3], Vec3 center, Vec3 translation);

}  // namespace symrec
