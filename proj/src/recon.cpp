#include "symrec/recon.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "symrec/errors.hpp"
#include "symrec/parallel.hpp"
#include "symrec/rng.hpp"
#include "symrec/symmetry.hpp"

namespace symrec {

namespace {

struct ConvSpec {
    const char* name;
    int cin;
    int cout;
};

constexpr ConvSpec kRnLayers[] = {{"conv1", 1, 8}, {"conv2", 8, 16}, {"conv3", 16, 16}, {"conv4", 16, 8}, {"conv5", 8, 1}};

double mean(const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

graph::PlaneParam plane_for(graph::Tape& tape, const std::vector<graph::Value>& sn_bound, graph::Value v_rec,
                            bool detach) {
    if (!detach) return graph::sn_forward(sn_bound, v_rec);
    const auto frozen = tape.constant(v_rec.shape(), std::vector<double>(v_rec.data().begin(), v_rec.data().end()));
    const auto p = graph::sn_forward(sn_bound, frozen);
    return {tape.constant(graph::Shape::vector(4), std::vector<double>(p.plane4.data().begin(), p.plane4.data().end())),
            p.anchor, p.scale};
}

double forward_loss(const RnParams& rn, const SnParams& sn, const RnPair& pair, double alpha) {
    graph::Tape tape;
    const auto bound = rn.params.bind(tape, false);
    const auto d = tape.constant(pair.defective);
    const auto rec = graph::rn_forward(bound, d);
    if (alpha == 0.0) return graph::dice_loss(rec, tape.constant(pair.implant)).item();
    const auto snb = sn.params.bind(tape, false);
    const auto plane = graph::sn_forward(snb, graph::maximum(d, rec));
    return graph::objective_rec(rec, d, tape.constant(pair.implant), plane, alpha).item();
}

}  // namespace

RnParams RnParams::init(std::uint64_t seed) {
    Rng rng(derive_seed(seed, "rn-init"));
    RnParams rn;
    for (const auto& l : kRnLayers) {
        const int fan_in = l.cin * 27;
        const double a = std::sqrt(6.0 / fan_in);
        std::vector<double> w(static_cast<std::size_t>(l.cout) * fan_in);
        for (double& x : w) x = rng.uniform(-a, a);
        const auto shape = graph::Shape::vector(static_cast<int>(w.size()));
        rn.params.add(std::string(l.name) + ".weight", shape, std::move(w));
        const double bias = l.cout == 1 ? kRnInitialLogit : 0.0;
        rn.params.add(std::string(l.name) + ".bias", graph::Shape::vector(l.cout), std::vector<double>(l.cout, bias));
    }
    return rn;
}

namespace graph {

Value rn_forward(const std::vector<Value>& bound, Value defective) {
    if (bound.size() != 10) throw std::invalid_argument("rn_forward: expected 10 bound parameters");
    const Shape s = defective.shape();
    if (s.c != 1 || s.nx % 4 || s.ny % 4 || s.nz % 4) {
        throw DataError("rn_forward: input must be 1-channel with dims divisible by 4, got " + s.str());
    }
    Value h = leaky_relu(conv3d(defective, bound[0], bound[1]));
    h = avgpool2(h);
    h = leaky_relu(conv3d(h, bound[2], bound[3]));
    h = avgpool2(h);
    h = leaky_relu(conv3d(h, bound[4], bound[5]));
    h = upsample2(h);
    h = leaky_relu(conv3d(h, bound[6], bound[7]));
    h = upsample2(h);
    return sigmoid(conv3d(h, bound[8], bound[9]));
}

Value objective_rec(Value rec, Value v, Value gt, const PlaneParam& plane, double alpha) {
    if (!(alpha >= 0.0)) throw std::invalid_argument("objective_rec: alpha must be >= 0");
    const Value dsl = dice_loss(rec, gt);
    if (alpha == 0.0) return dsl;
    return add(dsl, scale(symmetry_loss(maximum(v, rec), plane), alpha));
}

}  // namespace graph

double objective_rec(const Volume& rec, const Volume& v, const Volume& gt, const Plane& plane, double alpha) {
    require_same_grid(rec, v, "objective_rec");
    require_same_grid(rec, gt, "objective_rec");
    graph::Tape tape;
    return graph::objective_rec(tape.constant(rec), tape.constant(v), tape.constant(gt),
                                graph::constant_plane(tape, plane), alpha)
        .item();
}

RnLossGrad rn_loss_and_grad(const RnParams& rn, const SnParams& sn, const RnPair& pair, double alpha,
                            bool detach_plane) {
    require_same_grid(pair.defective, pair.implant, "rn_loss_and_grad");
    graph::Tape tape;
    const auto bound = rn.params.bind(tape, true);
    const auto d = tape.constant(pair.defective);
    const auto gt = tape.constant(pair.implant);
    const auto rec = graph::rn_forward(bound, d);
    graph::Value loss;
    if (alpha == 0.0) {
        loss = graph::dice_loss(rec, gt);
    } else {
        const auto snb = sn.params.bind(tape, false);
        const auto plane = plane_for(tape, snb, graph::maximum(d, rec), detach_plane);
        loss = graph::objective_rec(rec, d, gt, plane, alpha);
    }
    if (!std::isfinite(loss.item())) throw NumericalError("rn_loss_and_grad: non-finite loss");
    tape.backward(loss);
    RnLossGrad out{loss.item(), {}};
    out.grads.reserve(bound.size());
    for (const auto& b : bound) {
        const auto g = tape.grad(b);
        out.grads.emplace_back(g.begin(), g.end());
    }
    return out;
}

RnTrainResult train_rn(const std::vector<RnPair>& corpus, const SnParams& sn, const RnTrainConfig& cfg) {
    if (corpus.size() < kRnMinCorpus) {
        throw std::invalid_argument("train_rn: corpus needs at least " + std::to_string(kRnMinCorpus) + " pairs, got " +
                                    std::to_string(corpus.size()));
    }
    if (!(cfg.alpha >= 0.0)) throw ConfigError("train_rn: alpha must be >= 0");
    if (!(cfg.train_fraction > 0.5 && cfg.train_fraction < 0.95)) throw ConfigError("train_rn: train_fraction must lie in (0.5, 0.95)");
    if (cfg.max_epochs < 0 || cfg.batch < 1 || cfg.patience < 1) throw ConfigError("train_rn: invalid epoch/batch/patience settings");
    if (cfg.alpha_warmup_epochs < 0 || cfg.alpha_delay_epochs < 0) {
        throw ConfigError("train_rn: alpha_delay_epochs and alpha_warmup_epochs must be >= 0");
    }

    std::vector<RnPair> work;
    work.reserve(corpus.size());
    for (const auto& p : corpus) {
        require_same_grid(p.defective, p.implant, "train_rn");
        work.push_back({to_working_resolution(p.defective, cfg.working_edge), to_working_resolution(p.implant, cfg.working_edge)});
    }
    std::vector<std::size_t> order(work.size());
    std::iota(order.begin(), order.end(), 0);
    {
        Rng rng(derive_seed(cfg.seed, "rn-split"));
        std::shuffle(order.begin(), order.end(), rng.engine());
    }
    const auto n_train = static_cast<std::size_t>(std::lround(cfg.train_fraction * static_cast<double>(work.size())));
    std::vector<std::size_t> train_idx(order.begin(), order.begin() + n_train);
    const std::vector<std::size_t> val_idx(order.begin() + n_train, order.end());

    RnTrainResult result;
    result.params = RnParams::init(cfg.seed);
    const auto validate = [&](const RnParams& rn) {
        std::vector<double> losses(val_idx.size());
        parallel_for(val_idx.size(), cfg.workers, [&](std::size_t k) { losses[k] = forward_loss(rn, sn, work[val_idx[k]], cfg.alpha); });
        return mean(losses);
    };
    result.val_loss = validate(result.params);
    RnParams best = result.params;
    AdamW opt(cfg.weight_decay);
    PlateauScheduler sched(cfg.lr);
    int stale = 0;

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        Rng rng(derive_seed(cfg.seed, "rn-epoch", static_cast<std::uint64_t>(epoch)));
        const int ramp_epoch = epoch - cfg.alpha_delay_epochs;
        const double alpha = ramp_epoch <= 0 ? 0.0
                             : cfg.alpha_warmup_epochs > 0
                                 ? cfg.alpha * std::min(1.0, ramp_epoch / static_cast<double>(cfg.alpha_warmup_epochs))
                                 : cfg.alpha;
        std::shuffle(train_idx.begin(), train_idx.end(), rng.engine());
        std::vector<double> batch_losses;
        for (std::size_t start = 0; start < train_idx.size(); start += cfg.batch) {
            const std::size_t count = std::min<std::size_t>(cfg.batch, train_idx.size() - start);
            std::vector<RnLossGrad> items(count);
            parallel_for(count, cfg.workers, [&](std::size_t k) {
                items[k] = rn_loss_and_grad(result.params, sn, work[train_idx[start + k]], alpha, cfg.detach_plane);
            });
            auto grads = std::move(items[0].grads);
            double loss = items[0].loss;
            for (std::size_t k = 1; k < count; ++k) {
                loss += items[k].loss;
                for (std::size_t p = 0; p < grads.size(); ++p)
                    for (std::size_t j = 0; j < grads[p].size(); ++j) grads[p][j] += items[k].grads[p][j];
            }
            for (auto& g : grads)
                for (double& x : g) x /= static_cast<double>(count);
            opt.step(result.params.params, grads, sched.lr());
            batch_losses.push_back(loss / static_cast<double>(count));
        }
        const double val = validate(result.params);
        if (!std::isfinite(val)) {
            std::ostringstream msg;
            msg << "train_rn: validation loss became non-finite at epoch " << epoch << " (lr " << sched.lr() << ")";
            throw NumericalError(msg.str());
        }
        result.log.push_back({epoch, mean(batch_losses), val, sched.lr()});
        if (cfg.on_epoch) cfg.on_epoch(result.log.back());
        sched.observe(val);
        if (val < result.val_loss) {
            result.val_loss = val;
            result.best_epoch = epoch;
            best = result.params;
            stale = 0;
        } else if (++stale >= cfg.patience) {
            break;
        }
    }
    result.params = std::move(best);
    return result;
}

RnOutput infer_rn(const RnParams& rn, const Volume& defective, int working_edge) {
    const Volume small = to_working_resolution(defective, working_edge);
    graph::Tape tape;
    const auto out = graph::rn_forward(rn.params.bind(tape, false), tape.constant(small));
    Volume rec(small.dims(), std::vector<double>(out.data().begin(), out.data().end()), small.spacing());
    while (rec.dims().nx < defective.dims().nx) rec = upsample2(rec);
    rec = Volume(rec.dims(), rec.to_vector(), defective.spacing());
    return {rec, union_max(defective, rec)};
}

Volume defect_region_mask(const Volume& gt, int margin) {
    const Dims& d = gt.dims();
    int lo[3] = {d.nx, d.ny, d.nz}, hi[3] = {-1, -1, -1};
    for (int z = 0; z < d.nz; ++z)
        for (int y = 0; y < d.ny; ++y)
            for (int x = 0; x < d.nx; ++x) {
                if (gt.at(x, y, z) <= 0.5) continue;
                const int c[3] = {x, y, z};
                for (int k = 0; k < 3; ++k) {
                    lo[k] = std::min(lo[k], c[k]);
                    hi[k] = std::max(hi[k], c[k]);
                }
            }
    std::vector<double> m(d.count(), 0.0);
    if (hi[0] < 0) return Volume(d, std::move(m), gt.spacing());
    const int n[3] = {d.nx, d.ny, d.nz};
    for (int k = 0; k < 3; ++k) {
        lo[k] = std::max(0, lo[k] - margin);
        hi[k] = std::min(n[k] - 1, hi[k] + margin);
    }
    for (int z = lo[2]; z <= hi[2]; ++z)
        for (int y = lo[1]; y <= hi[1]; ++y)
            for (int x = lo[0]; x <= hi[0]; ++x) m[gt.index(x, y, z)] = 1.0;
    return Volume(d, std::move(m), gt.spacing());
}

Volume fit_logit_field(const Volume& defective, const Volume& gt, const SnParams* sn, const LogitFitConfig& cfg) {
    require_same_grid(defective, gt, "fit_logit_field");
    if (!(cfg.alpha >= 0.0)) throw ConfigError("fit_logit_field: alpha must be >= 0");
    if (cfg.iterations < 0) throw ConfigError("fit_logit_field: iterations must be >= 0");
    const Volume mask = defect_region_mask(gt, cfg.margin);
    const bool with_sn = cfg.use_sn && sn != nullptr;
    Plane fixed_plane;
    if (cfg.alpha > 0.0 && !with_sn) fixed_plane = fit_plane_direct(defective).plane;

    std::vector<double> logits(defective.size(), 0.0);
    AdamWState state;
    const auto shape = graph::Shape::volume(1, defective.dims());
    for (int it = 0; it < cfg.iterations; ++it) {
        graph::Tape tape;
        const auto l = tape.leaf(shape, logits);
        const auto rec = graph::mul(graph::sigmoid(l), tape.constant(mask));
        const auto d = tape.constant(defective);
        graph::PlaneParam plane;
        if (cfg.alpha > 0.0) {
            plane = with_sn ? graph::sn_forward(sn->params.bind(tape, false), graph::maximum(d, rec))
                            : graph::constant_plane(tape, fixed_plane);
        } else {
            plane = graph::constant_plane(tape, Plane::from({1.0, 0.0, 0.0}, 0.0));
        }
        const auto loss = graph::objective_rec(rec, d, tape.constant(gt), plane, cfg.alpha);
        tape.backward(loss);
        adamw_step(logits, tape.grad(l), state, cfg.lr, 0.0);
    }
    std::vector<double> out(logits.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = mask[i] > 0.5 ? 1.0 / (1.0 + std::exp(-logits[i])) : 0.0;
    return Volume(defective.dims(), std::move(out), defective.spacing());
}

}  // namespace symrec
