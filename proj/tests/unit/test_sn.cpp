#include <doctest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "symrec/errors.hpp"
#include "symrec/phantom.hpp"
#include "symrec/sn.hpp"
#include "symrec/symmetry.hpp"

using namespace symrec;

namespace {

std::vector<Volume> healthy(int count, int edge, std::uint64_t seed0) {
    std::vector<Volume> out;
    for (int i = 0; i < count; ++i) out.push_back(generate_skull(random_phantom_spec({edge, edge, edge}, seed0 + i, 0.0)).volume);
    return out;
}

}  // namespace

TEST_CASE("sn inference is deterministic and canonical") {
    const SnParams sn = SnParams::init(3, false);
    const Volume v = healthy(1, 32, 10)[0];
    const Plane a = infer_sn(sn, v), b = infer_sn(sn, v);
    CHECK(a.n == b.n);
    CHECK(a.d == b.d);
    const Plane c = Plane::from(a.n, a.d);
    CHECK(c.n == a.n);
    CHECK(c.d == a.d);
}

TEST_CASE("canonical prior predicts the sagittal plane through the centroid") {
    const SnParams sn = SnParams::init(4);
    const Volume v = healthy(1, 32, 11)[0];
    const Plane p = infer_sn(sn, v);
    const Vec3 c = centroid(v);
    CHECK(angle_between_deg(p, Plane::from({1, 0, 0}, 0)) < 1e-9);
    CHECK(p.d == doctest::Approx(c[0]).epsilon(1e-9));
}

TEST_CASE("sn input resolution must reduce to the pooled edge") {
    const SnParams sn = SnParams::init(1);
    CHECK_THROWS(infer_sn(sn, Volume::zeros({24, 24, 24})));
    CHECK_THROWS(infer_sn(sn, Volume::zeros({32, 32, 16})));
    CHECK_NOTHROW(infer_sn(sn, Volume::zeros({16, 16, 16})));
    CHECK(to_working_resolution(Volume::zeros({64, 64, 64}), 32).dims() == Dims{32, 32, 32});
    CHECK_THROWS(to_working_resolution(Volume::zeros({48, 48, 48}), 32));
}

TEST_CASE("untrained sn is worse than the direct fit") {
    const SnParams sn = SnParams::init(8, false);
    double sn_sl = 0.0, direct_sl = 0.0;
    const auto vols = healthy(4, 32, 20);
    for (const auto& v : vols) {
        sn_sl += symmetry_loss(v, infer_sn(sn, v));
        direct_sl += fit_plane_direct(v).sl;
    }
    CHECK(sn_sl > direct_sl);
}

TEST_CASE("sn output layer gradient matches finite differences") {
    using namespace symrec::graph;
    const SnParams sn = SnParams::init(9, false);
    const Volume v = to_working_resolution(healthy(1, 32, 30)[0], 16);
    const auto& items = sn.params.items();
    const std::size_t last = items.size() - 1;  // fc3 bias
    const auto r = gradcheck::check(
        [&](Tape& tape, Value x) {
            auto bound = sn.params.bind(tape, false);
            bound[last] = x;
            const auto vol = tape.constant(v);
            return symmetry_loss(vol, sn_forward(bound, vol));
        },
        items[last].shape, items[last].data, 1e-6);
    CHECK(r.error < 1e-3);
}

TEST_CASE("sn plane is differentiable with respect to the volume") {
    using namespace symrec::graph;
    const SnParams sn = SnParams::init(10, false);
    const Volume v = healthy(1, 32, 31)[0];
    Tape tape;
    const auto bound = sn.params.bind(tape, false);
    const auto vol = tape.leaf(v);
    const auto p = sn_forward(bound, vol);
    tape.backward(sum(p.plane4));
    double norm = 0.0;
    for (double g : tape.grad(vol)) norm += g * g;
    CHECK(norm > 0.0);
}

TEST_CASE("train_sn input checks") {
    CHECK_THROWS_AS(train_sn(healthy(10, 32, 40)), std::invalid_argument);
    SnTrainConfig cfg;
    cfg.val_fraction = 0.7;
    CHECK_THROWS_AS(train_sn(healthy(30, 32, 40), cfg), ConfigError);
}

TEST_CASE("short sn training is deterministic and does not get worse") {
    const auto corpus = healthy(30, 32, 50);
    SnTrainConfig cfg;
    cfg.epochs = 3;
    cfg.working_edge = 16;
    const auto a = train_sn(corpus, cfg);
    cfg.workers = 2;
    const auto b = train_sn(corpus, cfg);
    REQUIRE(a.log.size() == 3);
    CHECK(a.params.params.flatten() == b.params.params.flatten());
    CHECK(a.val_sl == b.val_sl);
    // The returned checkpoint is the best validation score seen, including
    // the untrained start (best_epoch 0).
    double best = 1.0;
    for (const auto& row : a.log) best = std::min(best, row.val_sl);
    CHECK(a.val_sl <= best);
    if (a.best_epoch > 0) CHECK(a.val_sl == a.log[a.best_epoch - 1].val_sl);
}
