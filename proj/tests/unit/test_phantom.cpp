#include <doctest.h>

#include <cmath>

#include "generators.hpp"
#include "oracles.hpp"
#include "symrec/phantom.hpp"
#include "symrec/symmetry.hpp"

using namespace symrec;

namespace {

PhantomSpec symmetric_spec(std::uint64_t seed = 1) {
    PhantomSpec s;
    s.asymmetry = 0.0;
    s.seed = seed;
    return s;
}

// Reflection of v through p by direct trilinear sampling, then soft Dice.
double oracle_reflect_dice_loss(const Volume& v, const Plane& p) {
    const Dims d = v.dims();
    oracle::Grid g{d.nx, d.ny, d.nz, v.to_vector()};
    std::vector<double> r(d.count());
    std::size_t i = 0;
    for (int z = 0; z < d.nz; ++z)
        for (int y = 0; y < d.ny; ++y)
            for (int x = 0; x < d.nx; ++x, ++i) {
                const Vec3 q = p.reflect({double(x), double(y), double(z)});
                r[i] = oracle::trilinear(g, q[0], q[1], q[2]);
            }
    return oracle::soft_dice_loss(g.v, r);
}

}  // namespace

TEST_CASE("generate_skull examples") {
    const Skull s = generate_skull(symmetric_spec());
    CHECK(s.volume.is_binary());
    CHECK(s.volume.sum() > 1000.0);
    CHECK(s.plane.n == Vec3{1.0, 0.0, 0.0});
    CHECK(s.plane.d == doctest::Approx(31.5));
    CHECK(oracle_reflect_dice_loss(s.volume, s.plane) < 0.02);
    CHECK(symmetry_loss(s.volume, s.plane) == doctest::Approx(oracle_reflect_dice_loss(s.volume, s.plane)).epsilon(1e-9));
    const Skull again = generate_skull(symmetric_spec());
    CHECK(std::equal(s.volume.data().begin(), s.volume.data().end(), again.volume.data().begin()));
}

TEST_CASE("generate_skull spec validation") {
    PhantomSpec s;
    s.thickness = -1.0;
    CHECK_THROWS_AS(generate_skull(s), std::invalid_argument);
    s = PhantomSpec{};
    s.dims = {4, 64, 64};
    CHECK_THROWS_AS(generate_skull(s), std::invalid_argument);
    s = PhantomSpec{};
    s.semi_axes = {40.0, 21.0, 14.0};
    CHECK_THROWS_AS(generate_skull(s), std::invalid_argument);
    s = PhantomSpec{};
    s.supersample = 0;
    CHECK_THROWS_AS(generate_skull(s), std::invalid_argument);
}

TEST_CASE("asymmetry raises the symmetry loss") {
    PhantomSpec a = symmetric_spec(5), b = symmetric_spec(5);
    b.asymmetry = 0.1 * b.thickness;
    const Skull sa = generate_skull(a), sb = generate_skull(b);
    CHECK(symmetry_loss(sb.volume, sb.plane) > symmetry_loss(sa.volume, sa.plane));
}

TEST_CASE("posed phantoms are most symmetric about the transformed plane") {
    // Oblique voxelization leaves a residual well above the axis-aligned one,
    // so the check is relative: small tilts and shifts of the plane score worse.
    gen::Engine e(31);
    for (int t = 0; t < 4; ++t) {
        PhantomSpec s = random_phantom_spec({48, 48, 48}, 100 + t, 0.0);
        s.pose = rotation_about(gen::unit_vector(e), gen::uniform(e, 0.0, 25.0), {gen::uniform(e, -1, 1), 0.0, 0.0});
        s.supersample = 2;
        const Skull k = generate_skull(s);
        CHECK(s.symmetry_plane().n == k.plane.n);
        const double at_truth = symmetry_loss(k.volume, k.plane);
        const Vec3 c = k.volume.center();
        const Vec3 axis = gen::unit_vector(e);
        CHECK(at_truth < symmetry_loss(k.volume, transform_plane(k.plane, rotation_about(axis, 3.0), c)));
        CHECK(at_truth < symmetry_loss(k.volume, Plane::from(k.plane.n, k.plane.d + 1.0)));
        CHECK(at_truth < symmetry_loss(k.volume, Plane::from(k.plane.n, k.plane.d - 1.0)));
    }
}

TEST_CASE("transform_plane commutes with the point transform") {
    gen::Engine e(32);
    for (int t = 0; t < 20; ++t) {
        const Plane p = gen::plane_through_grid(e, {32, 32, 32});
        const AffineTransform a = rotation_about(gen::unit_vector(e), gen::uniform(e, -40, 40),
                                                 {gen::uniform(e, -3, 3), gen::uniform(e, -3, 3), gen::uniform(e, -3, 3)});
        const Vec3 c{15.5, 15.5, 15.5};
        const Plane q = transform_plane(p, a, c);
        auto apply = [&](Vec3 x) {
            Vec3 y{};
            for (int i = 0; i < 3; ++i) {
                y[i] = c[i] + a.translation[i];
                for (int j = 0; j < 3; ++j) y[i] += a.linear[i][j] * (x[j] - c[j]);
            }
            return y;
        };
        for (int k = 0; k < 5; ++k) {
            const Vec3 x{gen::uniform(e, 0, 31), gen::uniform(e, 0, 31), gen::uniform(e, 0, 31)};
            const Vec3 lhs = apply(p.reflect(x)), rhs = q.reflect(apply(x));
            for (int i = 0; i < 3; ++i) CHECK(lhs[i] == doctest::Approx(rhs[i]).epsilon(1e-9));
        }
    }
}

TEST_CASE("insert_defect partitions the skull") {
    const Skull s = generate_skull(symmetric_spec(3));
    for (DefectKind kind : {DefectKind::spherical_cap, DefectKind::box, DefectKind::frontal}) {
        for (std::uint64_t seed = 1; seed <= 3; ++seed) {
            DefectSpec d;
            d.kind = kind;
            d.seed = seed;
            const DefectResult r = insert_defect(s.volume, d, s.plane);
            CHECK(r.implant.sum() > 0.0);
            for (std::size_t i = 0; i < s.volume.size(); ++i) {
                const double u = std::max(r.defective[i], r.implant[i]);
                if (u != s.volume[i] || r.defective[i] * r.implant[i] != 0.0) {
                    FAIL("partition violated at voxel " << i);
                }
            }
            if (kind == DefectKind::frontal) {
                int left = 0, right = 0;
                const Dims dm = s.volume.dims();
                for (int z = 0; z < dm.nz; ++z)
                    for (int y = 0; y < dm.ny; ++y)
                        for (int x = 0; x < dm.nx; ++x)
                            if (r.implant.at(x, y, z) > 0.0) (s.plane.signed_distance({double(x), double(y), double(z)}) < 0 ? left : right)++;
                CHECK(left > 0);
                CHECK(right > 0);
            }
        }
    }
}

TEST_CASE("insert_defect rejects defects that miss the shell") {
    const Skull s = generate_skull(symmetric_spec());
    DefectSpec d;
    d.center = Vec3{31.5, 31.5, 31.5};
    d.size = {3.0, 3.0, 3.0};
    CHECK_THROWS(insert_defect(s.volume, d, s.plane));
    CHECK_THROWS(insert_defect(Volume::filled({16, 16, 16}, 0.5), DefectSpec{}, s.plane));
}

TEST_CASE("defect kind names round trip") {
    for (DefectKind k : {DefectKind::spherical_cap, DefectKind::box, DefectKind::frontal})
        CHECK(defect_kind_from_string(to_string(k)) == k);
    CHECK_THROWS(defect_kind_from_string("hole"));
}

TEST_CASE("random_augment examples") {
    gen::Engine e(33);
    const Volume v = gen::smooth_volume(e, {20, 20, 20});
    const Volume same = apply_affine(v, AugmentDraw{}.transform());
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(std::abs(same[i] - v[i]) < 1e-6);

    const Skull s = generate_skull(symmetric_spec());
    AugmentDraw flip;
    flip.flip[0] = true;
    const Volume flipped = apply_affine(s.volume, flip.transform());
    CHECK(dice_loss(s.volume, flipped) < 0.02);

    const Volume a = random_augment(v, 77), b = random_augment(v, 77);
    CHECK(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
}

TEST_CASE("augment draws stay inside their ranges") {
    const Dims d{40, 48, 56};
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const AugmentDraw a = draw_augment(seed, d);
        for (int k = 0; k < 3; ++k) CHECK(std::abs(a.angles_deg[k]) <= kAugmentMaxAngleDeg);
        CHECK(std::abs(a.translation[0]) <= kAugmentMaxShift * d.nx);
        CHECK(std::abs(a.translation[1]) <= kAugmentMaxShift * d.ny);
        CHECK(std::abs(a.translation[2]) <= kAugmentMaxShift * d.nz);
        CHECK(a.scale >= kAugmentMinScale);
        CHECK(a.scale <= kAugmentMaxScale);
        const double det = a.transform().determinant();
        const double expected = std::pow(a.scale, 3) * ((a.flip[0] ^ a.flip[1] ^ a.flip[2]) ? -1.0 : 1.0);
        CHECK(det == doctest::Approx(expected).epsilon(1e-9));
    }
}
