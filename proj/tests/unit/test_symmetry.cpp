#include <doctest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "symrec/phantom.hpp"
#include "symrec/plane.hpp"
#include "symrec/symmetry.hpp"

using namespace symrec;

namespace {

Volume point_mass(Dims d, int x, int y, int z) {
    std::vector<double> v(d.count(), 0.0);
    v[(static_cast<std::size_t>(z) * d.ny + y) * d.nx + x] = 1.0;
    return Volume(d, std::move(v));
}

// Ball of radius r with a smooth edge about one voxel wide.
Volume blob(Dims d, Vec3 c, double r) {
    std::vector<double> v(d.count(), 0.0);
    std::size_t i = 0;
    for (int z = 0; z < d.nz; ++z)
        for (int y = 0; y < d.ny; ++y)
            for (int x = 0; x < d.nx; ++x, ++i) {
                const double q = std::sqrt(std::pow(x - c[0], 2) + std::pow(y - c[1], 2) + std::pow(z - c[2], 2));
                const double s = 1.0 / (1.0 + std::exp(-5.0 * (r - q)));
                v[i] = s < 1e-4 ? 0.0 : s;
            }
    return Volume(d, std::move(v));
}

Plane rotate_about(const Plane& p, Vec3 axis, double deg, Vec3 center) {
    const auto t = rotation_about(axis, deg);
    return transform_plane(p, t, center);
}

}  // namespace

TEST_CASE("plane canonical orientation") {
    const Plane p = Plane::from({-2.0, 0.0, 0.0}, -4.0);
    CHECK(p.n[0] == 1.0);
    CHECK(p.d == 2.0);
    const Plane q = Plane::from({0.0, -1.0, 1.0}, 1.0);
    CHECK(q.n[1] > 0.0);
    CHECK(std::abs(q.n[0] * q.n[0] + q.n[1] * q.n[1] + q.n[2] * q.n[2] - 1.0) < 1e-12);
    CHECK_THROWS(Plane::from({0.0, 0.0, 0.0}, 1.0));
    CHECK(angle_between_deg(p, Plane::from({1.0, 0.0, 0.0}, 7.0)) == doctest::Approx(0.0));
    CHECK(offset_difference(p, Plane::from({-1.0, 0.0, 0.0}, -2.5)) == doctest::Approx(0.5));
}

TEST_CASE("reflect examples") {
    const Dims d{17, 17, 17};
    const Volume m = reflect(point_mass(d, 10, 8, 8), Plane::from({1, 0, 0}, 8.0));
    CHECK(m.at(6, 8, 8) == doctest::Approx(1.0));
    CHECK(m.sum() == doctest::Approx(1.0));

    const Volume c = Volume::filled(d, 0.7);
    const Plane p = Plane::through({1.0, 0.3, -0.2}, {8.0, 8.0, 8.0});
    const Volume r = reflect(c, p);
    for (int z = 0; z < 17; ++z)
        for (int y = 0; y < 17; ++y)
            for (int x = 0; x < 17; ++x) {
                const Vec3 q = p.reflect({double(x), double(y), double(z)});
                const bool inside = q[0] >= 0 && q[1] >= 0 && q[2] >= 0 && q[0] <= 16 && q[1] <= 16 && q[2] <= 16;
                if (inside) CHECK(r.at(x, y, z) == doctest::Approx(0.7).epsilon(1e-12));
            }
}

TEST_CASE("reflection is an involution on smooth volumes") {
    // Soft Dice of a non-binary volume with itself is not zero, so the
    // round trip is measured against that self-loss.
    gen::Engine e(20);
    for (int t = 0; t < 6; ++t) {
        const Dims d{32, 32, 32};
        const Vec3 c{15.5 + gen::uniform(e, -1, 1), 15.5 + gen::uniform(e, -1, 1), 15.5 + gen::uniform(e, -1, 1)};
        const double r = gen::uniform(e, 7.0, 9.0);
        std::vector<double> data(d.count());
        std::size_t i = 0;
        for (int z = 0; z < d.nz; ++z)
            for (int y = 0; y < d.ny; ++y)
                for (int x = 0; x < d.nx; ++x, ++i) {
                    const double q = std::sqrt(std::pow(x - c[0], 2) + std::pow(y - c[1], 2) + std::pow(z - c[2], 2));
                    data[i] = 1.0 / (1.0 + std::exp(-1.5 * (r - q)));
                }
        const Volume v(d, std::move(data));
        const Plane p = gen::plane_through_grid(e, d);
        CHECK(dice_loss(v, reflect(reflect(v, p), p)) - dice_loss(v, v) < 0.02);
    }
}

TEST_CASE("axis planes on the voxel lattice reflect exactly") {
    gen::Engine e(25);
    for (int t = 0; t < 10; ++t) {
        const Dims d{16, 16, 16};
        const Volume v = gen::blocky_mask(e, d, 5);
        const int axis = gen::uniform_int(e, 0, 2);
        Vec3 n{0.0, 0.0, 0.0};
        n[axis] = 1.0;
        const Plane p = Plane::from(n, gen::uniform_int(e, 14, 16) / 2.0);
        const Volume back = reflect(reflect(v, p), p);
        // Voxels whose mirror image leaves the grid come back empty.
        for (int z = 0; z < 16; ++z)
            for (int y = 0; y < 16; ++y)
                for (int x = 0; x < 16; ++x) {
                    const Vec3 q = p.reflect({double(x), double(y), double(z)});
                    if (q[axis] < 0 || q[axis] > 15) continue;
                    if (back.at(x, y, z) != v.at(x, y, z)) FAIL("mismatch at " << x << "," << y << "," << z);
                }
    }
}

TEST_CASE("symmetry loss of phantoms") {
    PhantomSpec spec;
    spec.asymmetry = 0.0;
    const Skull s = generate_skull(spec);
    CHECK(symmetry_loss(s.volume, s.plane) < 0.02);
    // Oracle floor: SL over the family of planes tilted 30 degrees about a
    // set of axes perpendicular to the true normal.
    double floor = 1.0;
    for (int k = 0; k < 12; ++k) {
        const double a = k * M_PI / 12.0;
        const Plane tilted = rotate_about(s.plane, {0.0, std::cos(a), std::sin(a)}, 30.0, s.volume.center());
        floor = std::min(floor, symmetry_loss(s.volume, tilted));
    }
    CHECK(floor > 0.15);
    CHECK(symmetry_loss(Volume::zeros({16, 16, 16}), Plane::from({1, 0, 0}, 7.5)) < 1e-6);
}

TEST_CASE("symmetry loss is invariant under joint translation") {
    gen::Engine e(21);
    const Dims d{24, 24, 24};
    for (int t = 0; t < 3; ++t) {
        const Vec3 c{10.0, 11.0, 10.5};
        const Volume a = blob(d, c, 2.5);
        const Vec3 shift{double(gen::uniform_int(e, 1, 3)), double(gen::uniform_int(e, -2, 2)), double(gen::uniform_int(e, 0, 2))};
        const Volume b = blob(d, {c[0] + shift[0], c[1] + shift[1], c[2] + shift[2]}, 2.5);
        const Vec3 n = gen::unit_vector(e);
        const Plane p = Plane::through(n, {c[0] + 0.7, c[1], c[2]});
        const Plane q = Plane::through(n, {c[0] + 0.7 + shift[0], c[1] + shift[1], c[2] + shift[2]});
        CHECK(std::abs(symmetry_loss(a, p) - symmetry_loss(b, q)) < 1e-3);
    }
}

TEST_CASE("symmetry loss gradients") {
    gen::Engine e(22);
    using namespace symrec::graph;
    for (int t = 0; t < 3; ++t) {
        const Dims d{12, 12, 12};
        const Volume v = gen::smooth_volume(e, d);
        const Plane p = gen::plane_through_grid(e, d);
        const std::vector<double> raw{p.n[0], p.n[1], p.n[2], gen::uniform(e, -0.3, 0.3)};
        const Vec3 anchor{5.5 + gen::uniform(e, -0.5, 0.5), 5.5, 5.5};
        const auto rp = gradcheck::check([&](Tape& tape, Value x) { return symmetry_loss(tape.constant(v), PlaneParam{vec_normalize(x), anchor, 1.0}); },
                                         Shape::vector(4), raw, 1e-6);
        CHECK(rp.error < 1e-3);
        const Plane fixed = Plane::from({p.n[0], p.n[1], p.n[2]}, p.d);
        const auto rv = gradcheck::check([&](Tape& tape, Value x) { return symmetry_loss(x, constant_plane(tape, fixed)); },
                                         Shape::volume(1, d), v.to_vector(), 1e-5);
        CHECK(rv.error < 1e-3);
    }
}

TEST_CASE("symmetry loss plane gradient at 32^3") {
    gen::Engine e(23);
    using namespace symrec::graph;
    const Dims d{32, 32, 32};
    const Volume v = gen::smooth_volume(e, d, 4);
    const Vec3 n = gen::unit_vector(e);
    const std::vector<double> raw{n[0], n[1], n[2], 0.137};
    const Vec3 anchor{15.3, 15.6, 15.2};
    const auto r = gradcheck::check([&](Tape& tape, Value x) { return symmetry_loss(tape.constant(v), PlaneParam{vec_normalize(x), anchor, 1.0}); },
                                    Shape::vector(4), raw, 1e-6);
    CHECK(r.error < 1e-3);
}

TEST_CASE("fit_plane_direct finds the bisector of two mirrored blobs") {
    // Each blob is an irregular cluster so that no plane through both
    // centers is a symmetry as well.
    const Dims d{32, 32, 32};
    gen::Engine e(24);
    for (int t = 0; t < 2; ++t) {
        const Vec3 n = gen::unit_vector(e);
        const Vec3 mid{15.5 + gen::uniform(e, -1, 1), 15.5 + gen::uniform(e, -1, 1), 15.5 + gen::uniform(e, -1, 1)};
        const Plane truth = Plane::through(n, mid);
        Volume v = Volume::zeros(d);
        for (int k = 0; k < 3; ++k) {
            const Vec3 a{mid[0] + 7 * n[0] + gen::uniform(e, -2.5, 2.5), mid[1] + 7 * n[1] + gen::uniform(e, -2.5, 2.5),
                         mid[2] + 7 * n[2] + gen::uniform(e, -2.5, 2.5)};
            const double r = gen::uniform(e, 2.5, 3.5);
            v = union_max(v, union_max(blob(d, a, r), blob(d, truth.reflect(a), r)));
        }
        const auto r = fit_plane_direct(v);
        INFO("truth SL " << symmetry_loss(v, truth) << " fit SL " << r.sl);
        CHECK(angle_between_deg(r.plane, truth) < 1.0);
        CHECK(offset_difference(r.plane, truth) < 0.5);
    }
}

TEST_CASE("fit_plane_direct on an axis-symmetric phantom") {
    PhantomSpec spec;
    spec.asymmetry = 0.0;
    const Skull s = generate_skull(spec);
    const auto r = fit_plane_direct(s.volume);
    CHECK(r.sl < 0.02);
    CHECK(angle_between_deg(r.plane, s.plane) < 2.0);
    CHECK(offset_difference(r.plane, s.plane) < 1.0);
    CHECK(r.plane.n[0] > 0.0);
    CHECK_THROWS(fit_plane_direct(Volume::zeros({16, 16, 16})));
}

TEST_CASE("fit_plane_direct ignores the sign of the starting normals") {
    PhantomSpec spec = random_phantom_spec({32, 32, 32}, 5, 0.02);
    spec.pose = rotation_about({0.2, 1.0, 0.4}, 12.0);
    const Volume v = generate_skull(spec).volume;
    FitConfig a, b;
    b.negate_starts = true;
    const auto ra = fit_plane_direct(v, a), rb = fit_plane_direct(v, b);
    CHECK(ra.plane.n == rb.plane.n);
    CHECK(ra.plane.d == rb.plane.d);
}

TEST_CASE("refit_plane improves a perturbed plane") {
    PhantomSpec spec = random_phantom_spec({32, 32, 32}, 9, 0.0);
    const Skull s = generate_skull(spec);
    const Plane start = rotate_about(s.plane, {0.0, 0.0, 1.0}, 4.0, s.volume.center());
    const auto r = refit_plane(s.volume, start, 60, 0.005);
    CHECK(r.sl <= symmetry_loss(s.volume, start));
    CHECK(angle_between_deg(r.plane, s.plane) < angle_between_deg(start, s.plane));
}
