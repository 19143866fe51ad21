#pragma once

// Registration-based refinement: a dense displacement field deforms the
// reconstructed implant (never the defective skull) so that the completed
// skull becomes more symmetric, under diffusive regularization.

#include <string>
#include <vector>

#include <json.hpp>

#include "symrec/errors.hpp"
#include "symrec/plane.hpp"
#include "symrec/sn.hpp"
#include "symrec/voxgrid.hpp"

namespace symrec {

// Regularization weight quoted for sum-normalized Reg; informational only.
inline constexpr double kLambdaNominal = 1e5;
// Weight actually applied to the mean-normalized Reg by default, chosen by
// a calibration sweep on shifted-implant cases (tools/calibrate_lambda).
inline constexpr double kLambdaEffective = 0.1;

struct RefineConfig {
    double lambda_nominal = kLambdaNominal;
    double lambda = kLambdaEffective;
    double lr = 0.05;
    int iterations = 200;
    // Plane re-estimation cadence; the plane is constant between updates.
    int replan_every = 10;
    // Stop when the best loss improved by less than tol over `window` steps.
    double early_stop_tol = 1e-5;
    int early_stop_window = 20;
    // Divergence means loss > divergence_factor * max(initial, floor); the
    // floor keeps a near-zero initial loss from flagging every step.
    double divergence_factor = 10.0;
    double divergence_floor = 0.01;
    // On divergence the field returns to the best iterate and the step size
    // halves; RefineDiverged is thrown once these are used up.
    int max_backtracks = 30;
    // Direct-fit plane source only: iterations of each plane refit.
    int refit_iterations = 20;
    double refit_lr = 0.005;
};

struct RefineReport {
    double initial_sl = 0.0;
    double final_sl = 0.0;  // SL of the returned result about the last plane
    double reg = 0.0;       // Reg(u) of the returned field
    double best_loss = 0.0;
    double max_displacement = 0.0;
    int iterations = 0;
    int best_iteration = 0;
    bool early_stopped = false;
    bool diverged = false;
    int backtracks = 0;
    double lambda_nominal = 0.0;
    double lambda = 0.0;
    std::string plane_source;
    Plane plane;
    std::vector<double> best_loss_trace;

    nlohmann::json to_json() const;
};

struct RefineResult {
    Volume rec;
    RefineReport report;
};

struct RefineDiverged : NumericalError {
    RefineDiverged(const std::string& what, RefineReport r) : NumericalError(what), report(std::move(r)) {}
    RefineReport report;
};

// Backward warp of rec by a 3-channel field (voxel units), channel-major.
Volume warp(const Volume& rec, const std::vector<double>& field);
double diffusive_reg(const std::vector<double>& field, Dims dims);

// Optimizes u with AdamW on SL(max(v, warp(rec, u)), plane) + lambda Reg(u).
// The plane comes from `sn` when given, else from the direct fitter.
// Returns warp(rec, u) for the best iterate. Throws RefineDiverged when the
// loss still diverges after max_backtracks step halvings.
RefineResult refine_reconstruction(const Volume& v, const Volume& rec, const SnParams* sn,
                                   const RefineConfig& cfg = {});

}  // namespace symrec
