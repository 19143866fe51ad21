#pragma once

#include <functional>
#include <vector>

#include "generators.hpp"
#include "oracles.hpp"
#include "symrec/graph.hpp"

namespace gradcheck {

using symrec::graph::Shape;
using symrec::graph::Tape;
using symrec::graph::Value;

// Builds a scalar from one differentiable input; the other inputs are
// captured by the closure as constants.
using Builder = std::function<Value(Tape&, Value)>;

struct Result {
    std::vector<double> analytic;
    std::vector<double> numeric;
    double error = 0.0;
};

inline Result check(const Builder& f, Shape shape, const std::vector<double>& x, double h = 1e-5) {
    Result r;
    {
        Tape tape;
        const Value in = tape.leaf(shape, x);
        const Value out = f(tape, in);
        tape.backward(out);
        const auto g = tape.grad(in);
        r.analytic.assign(g.begin(), g.end());
    }
    r.numeric = oracle::numeric_gradient(
        [&](const std::vector<double>& p) {
            Tape tape;
            return f(tape, tape.leaf(shape, p, false)).item();
        },
        x, h);
    r.error = oracle::relative_error(r.analytic, r.numeric);
    return r;
}

// Contracts a tensor output with fixed random weights (vector-Jacobian check).
inline Value contract(Tape& tape, Value out, std::uint64_t seed) {
    gen::Engine e(seed);
    return symrec::graph::sum(symrec::graph::mul(out, tape.constant(out.shape(), gen::vector(e, out.shape().size(), -1.0, 1.0))));
}

}  // namespace gradcheck
