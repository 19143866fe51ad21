#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "symrec/plane.hpp"
#include "symrec/voxgrid.hpp"

namespace symrec {

// y = A (x - c) + t + c about the grid center c, voxel units.
struct AffineTransform {
    double linear[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    Vec3 translation{0.0, 0.0, 0.0};

    double determinant() const;
};

// Ellipsoidal shell standing in for a skull. Mirror symmetric about the
// sagittal plane x = (nx-1)/2; an egg taper along y and an open base below
// z = -base_cut * rz break the other two mirror symmetries so the sagittal
// plane is the unique symmetry plane.
struct PhantomSpec {
    Dims dims{64, 64, 64};
    Vec3 semi_axes{18.0, 21.0, 14.0};
    double thickness = 4.5;
    // Amplitude (voxels) of the random, non-mirrored surface bump field.
    double asymmetry = 0.09;
    double taper = 0.12;
    double base_cut = 0.45;
    std::uint64_t seed = 1;
    // Optional rigid pose applied to the continuous shape before
    // voxelization; the returned plane is transformed accordingly.
    std::optional<AffineTransform> pose;
    // Subsamples per axis; above 1 the volume holds partial-volume fractions
    // instead of a binary mask.
    int supersample = 1;

    // Throws std::invalid_argument naming the violated invariant.
    void validate() const;
    Plane symmetry_plane() const;
};

// Rotation by angle_deg about a (not necessarily unit) axis.
AffineTransform rotation_about(Vec3 axis, double angle_deg, Vec3 translation = {0.0, 0.0, 0.0});

// Randomized spec scaled to `dims` (semi-axes, thickness, taper drawn from
// fixed ranges); asymmetry = asymmetry_ratio * thickness.
PhantomSpec random_phantom_spec(Dims dims, std::uint64_t seed, double asymmetry_ratio = 0.02);

struct Skull {
    Volume volume;
    Plane plane;
};

Skull generate_skull(const PhantomSpec& spec);

enum class DefectKind { spherical_cap, box, frontal };

std::string to_string(DefectKind kind);
DefectKind defect_kind_from_string(const std::string& name);

struct DefectSpec {
    DefectKind kind = DefectKind::spherical_cap;
    // Defect center in voxel coordinates; drawn from `seed` when absent.
    std::optional<Vec3> center;
    // Radius for spherical caps and frontal defects; half-extents for boxes.
    Vec3 size{6.0, 6.0, 6.0};
    // Relative radial irregularity of ball-shaped defects.
    double irregularity = 0.15;
    std::uint64_t seed = 1;
};

struct DefectResult {
    Volume defective;
    Volume implant;
    Vec3 center;
};

// Removes the defect region from a binary skull. The implant is the removed
// bone; defective OR implant == v and defective AND implant is empty.
// `plane` is the skull's symmetry plane, used to place and check frontal
// defects. Throws when the defect misses the shell.
DefectResult insert_defect(const Volume& v, const DefectSpec& d, const Plane& plane);

// Output voxel y takes the input value at the preimage of y.
Volume apply_affine(const Volume& v, const AffineTransform& t);
Plane transform_plane(const Plane& p, const AffineTransform& t, Vec3 center);

struct AugmentDraw {
    bool flip[3] = {false, false, false};
    Vec3 angles_deg{0.0, 0.0, 0.0};
    Vec3 translation{0.0, 0.0, 0.0};
    double scale = 1.0;

    AffineTransform transform() const;
};

inline constexpr double kAugmentMaxAngleDeg = 30.0;
inline constexpr double kAugmentMaxShift = 0.10;
inline constexpr double kAugmentMinScale = 0.85;
inline constexpr double kAugmentMaxScale = 1.15;

// Independent axis flips (p = 0.5), per-axis rotations in +-30 deg,
// translations within +-10% of dims, isotropic scale in [0.85, 1.15].
AugmentDraw draw_augment(std::uint64_t seed, Dims dims);
Volume random_augment(const Volume& v, std::uint64_t seed);

}  // namespace symrec
