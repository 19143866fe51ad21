#include "symrec/sn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "symrec/errors.hpp"
#include "symrec/parallel.hpp"
#include "symrec/phantom.hpp"
#include "symrec/rng.hpp"

namespace symrec {

namespace {

constexpr int kSnInputs = kSnPooledEdge * kSnPooledEdge * kSnPooledEdge;

std::vector<double> he_uniform(Rng& rng, std::size_t count, int fan_in, double gain) {
    const double a = gain * std::sqrt(6.0 / fan_in);
    std::vector<double> w(count);
    for (double& x : w) x = rng.uniform(-a, a);
    return w;
}

int pool_steps(Dims d) {
    if (d.nx != d.ny || d.ny != d.nz) throw DataError("SN input must be cubic, got " + std::to_string(d.nx) + "x" +
                                                      std::to_string(d.ny) + "x" + std::to_string(d.nz));
    int steps = 0;
    for (int n = d.nx; n > kSnPooledEdge; n /= 2) {
        if (n % 2) break;
        ++steps;
    }
    if ((d.nx >> steps) != kSnPooledEdge || (kSnPooledEdge << steps) != d.nx) {
        throw DataError("SN input edge must be 16 * 2^k, got " + std::to_string(d.nx));
    }
    return steps;
}

Vec3 anchor_of(std::span<const double> data, Dims d) {
    double mass = 0.0, sx = 0.0, sy = 0.0, sz = 0.0;
    std::size_t i = 0;
    for (int z = 0; z < d.nz; ++z)
        for (int y = 0; y < d.ny; ++y)
            for (int x = 0; x < d.nx; ++x, ++i) {
                const double w = data[i];
                mass += w;
                sx += w * x;
                sy += w * y;
                sz += w * z;
            }
    if (!(mass > 0.0)) return {(d.nx - 1) / 2.0, (d.ny - 1) / 2.0, (d.nz - 1) / 2.0};
    return {sx / mass, sy / mass, sz / mass};
}

double mean_val_sl(const SnParams& sn, const std::vector<Volume>& val) {
    double total = 0.0;
    for (const auto& v : val) total += symmetry_loss(v, infer_sn(sn, v));
    return val.empty() ? 0.0 : total / static_cast<double>(val.size());
}

}  // namespace

SnParams SnParams::init(std::uint64_t seed, bool canonical_prior) {
    Rng rng(derive_seed(seed, "sn-init"));
    SnParams sn;
    auto& p = sn.params;
    p.add("fc1.weight", graph::Shape::vector(kSnHidden1 * kSnInputs), he_uniform(rng, kSnHidden1 * kSnInputs, kSnInputs, 1.0));
    p.add("fc1.bias", graph::Shape::vector(kSnHidden1), std::vector<double>(kSnHidden1, 0.0));
    p.add("fc2.weight", graph::Shape::vector(kSnHidden2 * kSnHidden1), he_uniform(rng, kSnHidden2 * kSnHidden1, kSnHidden1, 1.0));
    p.add("fc2.bias", graph::Shape::vector(kSnHidden2), std::vector<double>(kSnHidden2, 0.0));
    p.add("fc3.weight", graph::Shape::vector(4 * kSnHidden2),
          canonical_prior ? std::vector<double>(4 * kSnHidden2, 0.0) : he_uniform(rng, 4 * kSnHidden2, kSnHidden2, 1.0));
    p.add("fc3.bias", graph::Shape::vector(4),
          canonical_prior ? std::vector<double>{1.0, 0.0, 0.0, 0.0} : std::vector<double>(4, 0.0));
    return sn;
}

double grid_half_diagonal(Dims d) {
    return 0.5 * std::sqrt(static_cast<double>(d.nx) * d.nx + static_cast<double>(d.ny) * d.ny +
                           static_cast<double>(d.nz) * d.nz);
}

namespace graph {

PlaneParam sn_forward(const std::vector<Value>& bound, Value vol) {
    if (bound.size() != 6) throw std::invalid_argument("sn_forward: expected 6 bound parameters");
    const Shape s = vol.shape();
    if (s.c != 1) throw DataError("sn_forward: expected a 1-channel volume, got " + s.str());
    const int steps = pool_steps(s.spatial());
    const Dims d = s.spatial();
    const Vec3 anchor = anchor_of(vol.data(), d);
    // Recenter on the (detached) centroid so the regressor only has to deal
    // with orientation and scale, not position.
    const Vec3 shift{anchor[0] - (d.nx - 1) / 2.0, anchor[1] - (d.ny - 1) / 2.0, anchor[2] - (d.nz - 1) / 2.0};
    std::vector<double> field(3 * s.voxels());
    for (int c = 0; c < 3; ++c) std::fill(field.begin() + c * s.voxels(), field.begin() + (c + 1) * s.voxels(), shift[c]);
    Value x = warp(vol, vol.tape().constant(Shape::volume(3, d), std::move(field)));
    for (int i = 0; i < steps; ++i) x = avgpool2(x);
    Value h = reshape(x, Shape::vector(kSnInputs));
    h = leaky_relu(dense(h, bound[0], bound[1]));
    h = leaky_relu(dense(h, bound[2], bound[3]));
    const Value out = dense(h, bound[4], bound[5]);
    return {vec_normalize(out), anchor, grid_half_diagonal(d)};
}

}  // namespace graph

Plane infer_sn(const SnParams& sn, const Volume& v) {
    graph::Tape tape;
    const auto bound = sn.params.bind(tape, false);
    return graph::to_plane(graph::sn_forward(bound, tape.constant(v)));
}

Volume to_working_resolution(const Volume& v, int edge) {
    Volume out = v;
    while (out.dims().nx > edge || out.dims().ny > edge || out.dims().nz > edge) out = downsample2(out);
    if (out.dims().nx != edge || out.dims().ny != edge || out.dims().nz != edge) {
        throw DataError("cannot reduce " + std::to_string(v.dims().nx) + "^3 volume to working edge " +
                        std::to_string(edge));
    }
    return out;
}

SnTrainResult train_sn(const std::vector<Volume>& corpus, const SnTrainConfig& cfg) {
    if (corpus.size() < kSnMinCorpus) {
        throw std::invalid_argument("train_sn: corpus needs at least " + std::to_string(kSnMinCorpus) +
                                    " volumes, got " + std::to_string(corpus.size()));
    }
    if (!(cfg.val_fraction > 0.0 && cfg.val_fraction < 0.5)) throw ConfigError("train_sn: val_fraction must lie in (0, 0.5)");
    if (cfg.epochs < 1 || cfg.batch < 1) throw ConfigError("train_sn: epochs and batch must be >= 1");

    std::vector<Volume> work;
    work.reserve(corpus.size());
    for (const auto& v : corpus) work.push_back(to_working_resolution(v, cfg.working_edge));

    std::vector<std::size_t> order(work.size());
    std::iota(order.begin(), order.end(), 0);
    {
        Rng rng(derive_seed(cfg.seed, "sn-split"));
        std::shuffle(order.begin(), order.end(), rng.engine());
    }
    const auto n_val = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(cfg.val_fraction * work.size())));
    std::vector<std::size_t> train_idx(order.begin() + n_val, order.end());
    std::vector<Volume> val;
    for (std::size_t k = 0; k < n_val; ++k) {
        const Volume& v = work[order[k]];
        val.push_back(cfg.augment ? random_augment(v, derive_seed(cfg.seed, "sn-val-aug", k)) : v);
    }

    SnTrainResult result;
    result.params = SnParams::init(cfg.seed);
    AdamW opt(cfg.weight_decay);
    PlateauScheduler sched(cfg.lr, cfg.plateau_patience);
    result.val_sl = mean_val_sl(result.params, val);
    SnParams best = result.params;

    const std::size_t n_params = result.params.params.items().size();
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        Rng rng(derive_seed(cfg.seed, "sn-epoch", static_cast<std::uint64_t>(epoch)));
        std::shuffle(train_idx.begin(), train_idx.end(), rng.engine());
        double epoch_loss = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < train_idx.size(); start += cfg.batch) {
            const std::size_t end = std::min(train_idx.size(), start + cfg.batch);
            const std::size_t count = end - start;
            std::vector<std::vector<std::vector<double>>> item_grads(count);
            std::vector<double> item_loss(count, 0.0);
            parallel_for(count, cfg.workers, [&](std::size_t k) {
                const std::size_t idx = train_idx[start + k];
                const Volume sample =
                    cfg.augment ? random_augment(work[idx], derive_seed(cfg.seed, "sn-aug",
                                                                        static_cast<std::uint64_t>(epoch) * 1000003u + idx))
                                : work[idx];
                graph::Tape tape;
                const auto bound = result.params.params.bind(tape, true);
                const auto vol = tape.constant(sample);
                const auto sl = graph::symmetry_loss(vol, graph::sn_forward(bound, vol));
                tape.backward(sl);
                item_loss[k] = sl.item();
                item_grads[k].resize(n_params);
                for (std::size_t p = 0; p < n_params; ++p) {
                    const auto g = tape.grad(bound[p]);
                    item_grads[k][p].assign(g.begin(), g.end());
                }
            });
            // Fixed-order reduction keeps results independent of the worker count.
            std::vector<std::vector<double>> grads = std::move(item_grads[0]);
            for (std::size_t k = 1; k < count; ++k)
                for (std::size_t p = 0; p < n_params; ++p)
                    for (std::size_t j = 0; j < grads[p].size(); ++j) grads[p][j] += item_grads[k][p][j];
            for (auto& g : grads)
                for (double& x : g) x /= static_cast<double>(count);
            opt.step(result.params.params, grads, sched.lr());
            for (double l : item_loss) epoch_loss += l;
            seen += count;
        }
        const double val_sl = mean_val_sl(result.params, val);
        result.log.push_back({epoch, epoch_loss / static_cast<double>(seen), val_sl, sched.lr()});
        if (cfg.on_epoch) cfg.on_epoch(result.log.back());
        sched.observe(val_sl);
        if (val_sl < result.val_sl) {
            result.val_sl = val_sl;
            result.best_epoch = epoch;
            best = result.params;
        }
    }
    result.params = std::move(best);
    return result;
}

}  // namespace symrec
