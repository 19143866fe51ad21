#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "symrec/graph.hpp"

namespace symrec {

struct AdamWState {
    std::vector<double> m;
    std::vector<double> v;
    long step = 0;
};

struct AdamBetas {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// One AdamW update with decoupled weight decay:
//   p <- p * (1 - lr * wd);  p <- p - lr * mhat / (sqrt(vhat) + eps)
void adamw_step(std::span<double> params, std::span<const double> grads, AdamWState& state, double lr,
                double weight_decay, const AdamBetas& betas = {});

// Halves the learning rate when the monitored loss has not improved (relative
// threshold 1e-4) for `patience` consecutive observations, never below `floor`.
class PlateauScheduler {
public:
    explicit PlateauScheduler(double lr, int patience = 10, double factor = 0.5, double floor = 1e-5)
        : lr_(lr), patience_(patience), factor_(factor), floor_(floor) {}

    // Returns true when this observation triggered a reduction.
    bool observe(double loss);
    double lr() const { return lr_; }
    double best() const { return best_; }

private:
    double lr_;
    int patience_;
    double factor_;
    double floor_;
    double best_ = 1e300;
    int stale_ = 0;
};

struct Parameter {
    std::string name;
    graph::Shape shape;
    std::vector<double> data;
};

// Named parameter tensors plus per-tensor AdamW state.
class ParameterSet {
public:
    Parameter& add(std::string name, graph::Shape shape, std::vector<double> data);
    std::vector<Parameter>& items() { return params_; }
    const std::vector<Parameter>& items() const { return params_; }
    const Parameter& get(const std::string& name) const;
    std::size_t total_size() const;

    // Copies every parameter onto the tape as a leaf.
    std::vector<graph::Value> bind(graph::Tape& tape, bool requires_grad) const;

    // Flat concatenation in declaration order (used for serialization).
    std::vector<double> flatten() const;
    void unflatten(std::span<const double> flat);

private:
    std::vector<Parameter> params_;
};

class AdamW {
public:
    AdamW(double weight_decay = 0.0, AdamBetas betas = {}) : weight_decay_(weight_decay), betas_(betas) {}

    // grads[i] is the gradient for params.items()[i].
    void step(ParameterSet& params, const std::vector<std::vector<double>>& grads, double lr);

private:
    double weight_decay_;
    AdamBetas betas_;
    std::vector<AdamWState> states_;
};

}  // namespace symrec
