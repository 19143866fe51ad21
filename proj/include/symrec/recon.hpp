#pragma once

// Implant reconstruction at a coarse working resolution: a five-layer
// convolutional encoder-decoder trained with Dice plus an optional symmetry
// term on the completed skull, and a per-voxel logit field optimized under
// the same objective.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "symrec/graph.hpp"
#include "symrec/optim.hpp"
#include "symrec/sn.hpp"
#include "symrec/voxgrid.hpp"

namespace symrec {

inline constexpr int kRnWorkingEdge = 32;
// Output bias at init: sigmoid(-4) ~ 0.018, close to the implant's share of
// the grid, so early steps do not have to suppress the whole background.
inline constexpr double kRnInitialLogit = -4.0;

struct RnParams {
    ParameterSet params;

    // conv1..conv5 with channel plan 1-8-16-16-8-1, He-uniform weights,
    // zero biases except the output layer (kRnInitialLogit).
    static RnParams init(std::uint64_t seed);
};

namespace graph {

// Logits -> sigmoid output; the input must have dims divisible by 4.
Value rn_forward(const std::vector<Value>& bound, Value defective);

// dice_loss(rec, gt) + alpha * symmetry_loss(max(v, rec), plane).
Value objective_rec(Value rec, Value v, Value gt, const PlaneParam& plane, double alpha);

}  // namespace graph

double objective_rec(const Volume& rec, const Volume& v, const Volume& gt, const Plane& plane, double alpha);

struct RnPair {
    Volume defective;
    Volume implant;
};

struct RnTrainLogRow {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double lr = 0.0;
};

struct RnTrainConfig {
    double alpha = 1.0;
    int max_epochs = 500;
    int patience = 50;
    int batch = 4;
    double lr = 1e-3;
    double weight_decay = 1e-4;
    double train_fraction = 0.9;
    // Symmetry-term schedule: weight 0 for the first alpha_delay_epochs, then
    // a linear rise to alpha over alpha_warmup_epochs. Validation always uses
    // the full alpha.
    int alpha_delay_epochs = 15;
    int alpha_warmup_epochs = 10;
    // Treat the SN plane as a constant instead of differentiating through SN.
    bool detach_plane = false;
    int working_edge = kRnWorkingEdge;
    std::uint64_t seed = 23;
    int workers = 1;
    // Called after every epoch; progress reporting only.
    std::function<void(const RnTrainLogRow&)> on_epoch;
};

struct RnTrainResult {
    RnParams params;  // best-validation checkpoint
    std::vector<RnTrainLogRow> log;
    double val_loss = 0.0;
    int best_epoch = 0;
};

inline constexpr std::size_t kRnMinCorpus = 50;

// Throws std::invalid_argument for corpora below kRnMinCorpus pairs and
// NumericalError when a loss turns non-finite.
RnTrainResult train_rn(const std::vector<RnPair>& corpus, const SnParams& sn, const RnTrainConfig& cfg = {});

// Loss and parameter gradients for one pair at working resolution; exposed
// for tests of the plane gradient routing.
struct RnLossGrad {
    double loss = 0.0;
    std::vector<std::vector<double>> grads;
};
RnLossGrad rn_loss_and_grad(const RnParams& rn, const SnParams& sn, const RnPair& pair, double alpha,
                            bool detach_plane);

struct RnOutput {
    Volume rec;    // at the input resolution, values in [0, 1]
    Volume v_rec;  // max(defective, rec)
};

// Reduces the input to the working edge, runs the network and upsamples the
// output back to the input grid.
RnOutput infer_rn(const RnParams& rn, const Volume& defective, int working_edge = kRnWorkingEdge);

struct LogitFitConfig {
    double alpha = 1.0;
    int iterations = 300;
    double lr = 0.1;
    // Dilation (voxels) of the implant bounding box that delimits free voxels.
    int margin = 2;
    // Plane source: the SN when given, otherwise fit_plane_direct on the
    // initial completion, frozen for the run.
    bool use_sn = true;
};

// Per-voxel logits starting at 0, masked to the dilated bounding box of gt;
// returns sigmoid(logits) inside the mask and 0 outside.
Volume fit_logit_field(const Volume& defective, const Volume& gt, const SnParams* sn, const LogitFitConfig& cfg = {});

// Mask used by fit_logit_field.
Volume defect_region_mask(const Volume& gt, int margin);

}  // namespace symrec
