#include "symrec/refine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "symrec/graph.hpp"
#include "symrec/optim.hpp"
#include "symrec/symmetry.hpp"

namespace symrec {

nlohmann::json RefineReport::to_json() const {
    return {{"initial_sl", initial_sl},
            {"final_sl", final_sl},
            {"reg", reg},
            {"best_loss", best_loss},
            {"max_displacement", max_displacement},
            {"iterations", iterations},
            {"best_iteration", best_iteration},
            {"early_stopped", early_stopped},
            {"diverged", diverged},
            {"backtracks", backtracks},
            {"lambda_nominal", lambda_nominal},
            {"lambda", lambda},
            {"plane_source", plane_source},
            {"plane", {{"n", {plane.n[0], plane.n[1], plane.n[2]}}, {"d", plane.d}}}};
}

Volume warp(const Volume& rec, const std::vector<double>& field) {
    graph::Tape tape;
    const auto out = graph::warp(tape.constant(rec), tape.constant(graph::Shape::volume(3, rec.dims()), field));
    return Volume(rec.dims(), std::vector<double>(out.data().begin(), out.data().end()), rec.spacing());
}

double diffusive_reg(const std::vector<double>& field, Dims dims) {
    graph::Tape tape;
    return graph::diffusive_reg(tape.constant(graph::Shape::volume(3, dims), field)).item();
}

namespace {

double max_norm(const std::vector<double>& u, std::size_t n) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        m = std::max(m, std::sqrt(u[i] * u[i] + u[n + i] * u[n + i] + u[2 * n + i] * u[2 * n + i]));
    return m;
}

}  // namespace

RefineResult refine_reconstruction(const Volume& v, const Volume& rec, const SnParams* sn, const RefineConfig& cfg) {
    require_same_grid(v, rec, "refine_reconstruction");
    if (!(cfg.lambda > 0.0)) throw ConfigError("refine: lambda must be > 0");
    if (!(cfg.lr > 0.0) || cfg.iterations < 0 || cfg.replan_every < 1 || cfg.early_stop_window < 1 ||
        cfg.max_backtracks < 0 || !(cfg.divergence_floor >= 0.0)) {
        throw ConfigError("refine: invalid optimizer settings");
    }
    const Dims dims = v.dims();
    const std::size_t n = dims.count();
    const auto field_shape = graph::Shape::volume(3, dims);

    RefineReport report;
    report.lambda_nominal = cfg.lambda_nominal;
    report.lambda = cfg.lambda;
    report.plane_source = sn ? "amortized" : "direct";

    const auto estimate_plane = [&](const Volume& v_rec, const Plane* previous) {
        if (sn) return infer_sn(*sn, v_rec);
        if (previous) return refit_plane(v_rec, *previous, cfg.refit_iterations, cfg.refit_lr).plane;
        return fit_plane_direct(v_rec).plane;
    };

    std::vector<double> u(3 * n, 0.0), best_u = u;
    AdamWState state;
    Plane plane = estimate_plane(union_max(v, rec), nullptr);
    double initial_loss = 0.0;
    double best = std::numeric_limits<double>::infinity();
    Volume best_rec = rec;
    int since_improve_ref = 0;
    double window_ref = 0.0;

    double step_scale = 1.0;
    int it = 0;
    for (;; ++it) {
        graph::Tape tape;
        const auto field = tape.leaf(field_shape, u);
        const auto warped = graph::warp(tape.constant(rec), field);
        if (it > 0 && it % cfg.replan_every == 0) {
            const Volume v_rec = union_max(v, Volume(dims, std::vector<double>(warped.data().begin(), warped.data().end()), v.spacing()));
            plane = estimate_plane(v_rec, &plane);
        }
        const auto sl = graph::symmetry_loss(graph::maximum(tape.constant(v), warped), graph::constant_plane(tape, plane));
        const auto reg = graph::diffusive_reg(field);
        const auto loss = graph::add(sl, graph::scale(reg, cfg.lambda));
        const double value = loss.item();
        if (it == 0) {
            initial_loss = value;
            report.initial_sl = sl.item();
            window_ref = value;
        }
        const double limit = cfg.divergence_factor * std::max(initial_loss, cfg.divergence_floor);
        if (!std::isfinite(value) || value > limit) {
            if (report.backtracks < cfg.max_backtracks) {
                // Back to the best field with half the step size.
                ++report.backtracks;
                step_scale *= 0.5;
                u = best_u;
                state = AdamWState{};
                if (it >= cfg.iterations) break;
                continue;
            }
            report.diverged = true;
            report.iterations = it;
            throw RefineDiverged("refine: loss " + std::to_string(value) + " exceeds " +
                                     std::to_string(cfg.divergence_factor) + "x the initial " + std::to_string(initial_loss) +
                                     " after " + std::to_string(report.backtracks) + " step halvings",
                                 report);
        }
        if (value < best) {
            best = value;
            best_u = u;
            report.best_iteration = it;
            report.final_sl = sl.item();
            report.reg = reg.item();
            report.plane = plane;
            best_rec = Volume(dims, std::vector<double>(warped.data().begin(), warped.data().end()), v.spacing());
        }
        report.best_loss_trace.push_back(best);
        if (it >= cfg.iterations) break;
        if (++since_improve_ref >= cfg.early_stop_window) {
            if (window_ref - best < cfg.early_stop_tol) {
                report.early_stopped = true;
                break;
            }
            window_ref = best;
            since_improve_ref = 0;
        }
        tape.backward(loss);
        adamw_step(u, tape.grad(field), state, cfg.lr * step_scale, 0.0);
    }
    report.iterations = it;
    report.best_loss = best;
    report.max_displacement = max_norm(best_u, n);
    return {std::move(best_rec), std::move(report)};
}

}  // namespace symrec
