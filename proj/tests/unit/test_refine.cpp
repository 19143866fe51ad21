#include <doctest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "symrec/errors.hpp"
#include "symrec/phantom.hpp"
#include "symrec/refine.hpp"
#include "symrec/symmetry.hpp"

using namespace symrec;

namespace {

struct Case {
    Skull skull;
    DefectResult defect;
};

Case make_case(int edge, std::uint64_t seed) {
    const Skull s = generate_skull(random_phantom_spec({edge, edge, edge}, seed, 0.0));
    DefectSpec d;
    d.seed = seed;
    d.size = {edge / 8.0, edge / 8.0, edge / 8.0};
    return {s, insert_defect(s.volume, d, s.plane)};
}

Volume shifted(const Volume& v, int dx) {
    const Dims d = v.dims();
    std::vector<double> out(d.count(), 0.0);
    for (int z = 0; z < d.nz; ++z)
        for (int y = 0; y < d.ny; ++y)
            for (int x = 0; x < d.nx; ++x) {
                const int sx = x - dx;
                if (sx >= 0 && sx < d.nx) out[v.index(x, y, z)] = v.at(sx, y, z);
            }
    return Volume(d, std::move(out));
}

}  // namespace

TEST_CASE("warp examples") {
    const Dims d{16, 16, 16};
    std::vector<double> mass(d.count(), 0.0);
    mass[Volume::zeros(d).index(6, 8, 8)] = 1.0;
    const Volume m(d, mass);
    std::vector<double> u(3 * d.count(), 0.0);
    const Volume same = warp(m, u);
    CHECK(std::equal(same.data().begin(), same.data().end(), m.data().begin()));
    std::fill(u.begin(), u.begin() + d.count(), 2.0);
    const Volume moved = warp(m, u);
    CHECK(moved.at(4, 8, 8) == 1.0);
    CHECK(moved.sum() == 1.0);
    CHECK_THROWS(warp(m, std::vector<double>(10, 0.0)));
}

TEST_CASE("diffusive_reg examples") {
    const Dims d{4, 4, 4};
    const std::size_t n = d.count();
    CHECK(diffusive_reg(std::vector<double>(3 * n, 0.0), d) == 0.0);
    CHECK(diffusive_reg(std::vector<double>(3 * n, 5.0), d) == 0.0);
    std::vector<double> ramp(3 * n, 0.0);
    for (int z = 0; z < 4; ++z)
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 4; ++x) ramp[(z * 4 + y) * 4 + x] = x;
    CHECK(diffusive_reg(ramp, d) == doctest::Approx(oracle::diffusive_reg(ramp, 4, 4, 4)));
    gen::Engine e(71);
    for (int t = 0; t < 10; ++t) {
        const Dims r = gen::dims(e, 3, 7);
        const auto u = gen::vector(e, 3 * r.count(), -2.0, 2.0);
        CHECK(diffusive_reg(u, r) == doctest::Approx(oracle::diffusive_reg(u, r.nx, r.ny, r.nz)).epsilon(1e-12));
    }
}

TEST_CASE("refinement objective gradient with respect to the field") {
    using namespace symrec::graph;
    gen::Engine e(72);
    const Dims d{12, 12, 12};
    const Volume v = gen::smooth_volume(e, d), rec = gen::smooth_volume(e, d);
    const Plane p = gen::plane_through_grid(e, d);
    const auto r = gradcheck::check(
        [&](Tape& tape, Value u) {
            const auto sl = symmetry_loss(maximum(tape.constant(v), warp(tape.constant(rec), u)), constant_plane(tape, p));
            return add(sl, scale(diffusive_reg(u), 0.5));
        },
        Shape::volume(3, d), gen::vector(e, 3 * d.count(), -0.7, 0.7), 1e-6);
    CHECK(r.error < 1e-3);
}

TEST_CASE("huge lambda keeps the reconstruction") {
    const Case c = make_case(32, 3);
    const Volume rec = shifted(c.defect.implant, 2);
    const auto before = c.defect.defective.to_vector();
    RefineConfig cfg;
    cfg.lambda = 1e9;
    cfg.iterations = 30;
    const auto r = refine_reconstruction(c.defect.defective, rec, nullptr, cfg);
    for (std::size_t i = 0; i < rec.size(); ++i) CHECK(std::abs(r.rec[i] - rec[i]) < 1e-3);
    CHECK(c.defect.defective.to_vector() == before);
}

TEST_CASE("refinement leaves a symmetric completion nearly in place") {
    const Case c = make_case(32, 4);
    RefineConfig cfg;
    cfg.iterations = 60;
    const auto r = refine_reconstruction(c.defect.defective, c.defect.implant, nullptr, cfg);
    CHECK(r.report.max_displacement < 0.5);
    CHECK(r.report.best_loss <= r.report.best_loss_trace.front());
}

TEST_CASE("refinement pulls a shifted implant back") {
    const Case c = make_case(32, 5);
    const Volume rec = shifted(c.defect.implant, 2);
    RefineConfig cfg;
    cfg.iterations = 100;
    const auto r = refine_reconstruction(c.defect.defective, rec, nullptr, cfg);
    CHECK(r.report.final_sl < r.report.initial_sl);
    CHECK(dice_loss(r.rec, c.defect.implant) < dice_loss(rec, c.defect.implant));
    // The best-loss trace never increases.
    for (std::size_t i = 1; i < r.report.best_loss_trace.size(); ++i)
        CHECK(r.report.best_loss_trace[i] <= r.report.best_loss_trace[i - 1]);
}

TEST_CASE("larger lambda gives smaller displacements") {
    const Case c = make_case(32, 6);
    const Volume rec = shifted(c.defect.implant, 2);
    double previous = std::numeric_limits<double>::infinity();
    for (double lambda : {0.1, 10.0, 1000.0}) {
        RefineConfig cfg;
        cfg.lambda = lambda;
        cfg.iterations = 40;
        cfg.replan_every = 1000;
        const auto r = refine_reconstruction(c.defect.defective, rec, nullptr, cfg);
        CHECK(r.report.reg <= previous);
        previous = r.report.reg;
    }
}

TEST_CASE("refine config validation and divergence") {
    const Case c = make_case(32, 7);
    RefineConfig cfg;
    cfg.lambda = 0.0;
    CHECK_THROWS_AS(refine_reconstruction(c.defect.defective, c.defect.implant, nullptr, cfg), ConfigError);
    cfg = RefineConfig{};
    cfg.replan_every = 0;
    CHECK_THROWS_AS(refine_reconstruction(c.defect.defective, c.defect.implant, nullptr, cfg), ConfigError);
    CHECK_THROWS(refine_reconstruction(c.defect.defective, Volume::zeros({16, 16, 16}), nullptr));

    // A huge step size blows the field up; without step halving the
    // divergence guard aborts, with it the best iterate survives.
    cfg = RefineConfig{};
    cfg.lr = 1e4;
    cfg.lambda = 1e3;
    cfg.iterations = 20;
    cfg.replan_every = 1000;
    const auto rescued = refine_reconstruction(c.defect.defective, shifted(c.defect.implant, 2), nullptr, cfg);
    CHECK(rescued.report.backtracks > 0);
    CHECK(rescued.report.best_loss <= rescued.report.best_loss_trace.front());
    cfg.max_backtracks = 0;
    try {
        refine_reconstruction(c.defect.defective, shifted(c.defect.implant, 2), nullptr, cfg);
        FAIL("expected divergence");
    } catch (const RefineDiverged& e) {
        CHECK(e.report.diverged);
        CHECK(e.report.iterations > 0);
    }
}
