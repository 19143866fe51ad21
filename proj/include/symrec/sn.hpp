#pragma once

// Amortized symmetry-plane regressor: average-pool to 16^3, then a dense
// 4096 -> 256 -> 64 -> 4 stack with leaky-ReLU, the first three outputs
// normalized to the plane normal. The fourth output is the plane offset
// from the input's foreground centroid in units of the grid half-diagonal,
// which makes the network independent of the working resolution. Before the
// dense stack the pooled volume is shifted (not differentiated) so that its
// foreground centroid sits at the grid center.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "symrec/graph.hpp"
#include "symrec/optim.hpp"
#include "symrec/plane.hpp"
#include "symrec/symmetry.hpp"
#include "symrec/voxgrid.hpp"

namespace symrec {

inline constexpr int kSnPooledEdge = 16;
inline constexpr int kSnHidden1 = 256;
inline constexpr int kSnHidden2 = 64;

struct SnParams {
    ParameterSet params;

    // He-uniform weights. With canonical_prior the output layer starts at
    // zero weights with bias (1, 0, 0, 0), i.e. the sagittal plane through the
    // centroid; otherwise the output layer is random like the others.
    static SnParams init(std::uint64_t seed, bool canonical_prior = true);
};

// Half-diagonal of the grid in voxels.
double grid_half_diagonal(Dims d);

namespace graph {

// Differentiable forward pass on a bound copy of the parameters (see
// ParameterSet::bind). The anchor is taken from the current value of `vol`
// and treated as a constant.
PlaneParam sn_forward(const std::vector<Value>& bound, Value vol);

}  // namespace graph

Plane infer_sn(const SnParams& sn, const Volume& v);

struct SnTrainLogRow {
    int epoch = 0;
    double train_sl = 0.0;
    double val_sl = 0.0;
    double lr = 0.0;
};

struct SnTrainConfig {
    int epochs = 40;
    int batch = 8;
    double lr = 1e-3;
    double weight_decay = 1e-4;
    double val_fraction = 0.1;
    bool augment = true;
    // Volumes are downsampled (factor 2 steps) to this edge before training.
    int working_edge = 32;
    int plateau_patience = 10;
    std::uint64_t seed = 11;
    int workers = 1;
    // Called after every epoch; progress reporting only.
    std::function<void(const SnTrainLogRow&)> on_epoch;
};


struct SnTrainResult {
    SnParams params;  // checkpoint with the lowest validation SL
    std::vector<SnTrainLogRow> log;
    double val_sl = 0.0;
    int best_epoch = 0;
};

inline constexpr std::size_t kSnMinCorpus = 30;

// Unsupervised training: minimizes the mean symmetry loss of randomly
// augmented corpus volumes about the predicted plane. Throws
// std::invalid_argument for corpora smaller than kSnMinCorpus.
SnTrainResult train_sn(const std::vector<Volume>& corpus, const SnTrainConfig& cfg = {});

// Reduces a volume to the given edge by repeated 2x average pooling.
Volume to_working_resolution(const Volume& v, int edge);

}  // namespace symrec
