#include "symrec/optim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace symrec {

void adamw_step(std::span<double> params, std::span<const double> grads, AdamWState& state, double lr,
                double weight_decay, const AdamBetas& betas) {
    if (params.size() != grads.size()) throw std::invalid_argument("adamw_step: params/grads size mismatch");
    if (!(lr > 0.0)) throw std::invalid_argument("adamw_step: lr must be positive");
    if (state.m.size() != params.size()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
        state.step = 0;
    }
    ++state.step;
    const double bc1 = 1.0 - std::pow(betas.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(betas.beta2, static_cast<double>(state.step));
    const double decay = 1.0 - lr * weight_decay;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        state.m[i] = betas.beta1 * state.m[i] + (1.0 - betas.beta1) * g;
        state.v[i] = betas.beta2 * state.v[i] + (1.0 - betas.beta2) * g * g;
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        params[i] = params[i] * decay - lr * mhat / (std::sqrt(vhat) + betas.eps);
    }
}

bool PlateauScheduler::observe(double loss) {
    if (loss < best_ - 1e-4 * std::abs(best_)) {
        best_ = loss;
        stale_ = 0;
        return false;
    }
    if (++stale_ < patience_) return false;
    stale_ = 0;
    const double next = std::max(floor_, lr_ * factor_);
    const bool reduced = next < lr_;
    lr_ = next;
    return reduced;
}

Parameter& ParameterSet::add(std::string name, graph::Shape shape, std::vector<double> data) {
    if (data.size() != shape.size()) throw std::invalid_argument("parameter " + name + ": size mismatch");
    params_.push_back({std::move(name), shape, std::move(data)});
    return params_.back();
}

const Parameter& ParameterSet::get(const std::string& name) const {
    for (const auto& p : params_)
        if (p.name == name) return p;
    throw std::out_of_range("no parameter named " + name);
}

std::size_t ParameterSet::total_size() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.data.size();
    return n;
}

std::vector<graph::Value> ParameterSet::bind(graph::Tape& tape, bool requires_grad) const {
    std::vector<graph::Value> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.push_back(tape.leaf(p.shape, p.data, requires_grad));
    return out;
}

std::vector<double> ParameterSet::flatten() const {
    std::vector<double> flat;
    flat.reserve(total_size());
    for (const auto& p : params_) flat.insert(flat.end(), p.data.begin(), p.data.end());
    return flat;
}

void ParameterSet::unflatten(std::span<const double> flat) {
    if (flat.size() != total_size()) throw std::invalid_argument("unflatten: size mismatch");
    std::size_t off = 0;
    for (auto& p : params_) {
        std::copy(flat.begin() + off, flat.begin() + off + p.data.size(), p.data.begin());
        off += p.data.size();
    }
}

void AdamW::step(ParameterSet& params, const std::vector<std::vector<double>>& grads, double lr) {
    auto& items = params.items();
    if (grads.size() != items.size()) throw std::invalid_argument("AdamW::step: gradient count mismatch");
    if (states_.size() != items.size()) states_.assign(items.size(), {});
    for (std::size_t i = 0; i < items.size(); ++i) {
        adamw_step(items[i].data, grads[i], states_[i], lr, weight_decay_, betas_);
    }
}

}  // namespace symrec
