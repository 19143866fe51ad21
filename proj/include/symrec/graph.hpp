#pragma once

// Reverse-mode differentiation over a small, closed set of volumetric ops.
//
// A Tape records nodes in creation order, which is a topological order, and
// backward() visits them once in reverse. Values are 64-bit throughout.
// Tensors use channel-major, x-fastest layout: index = ((c*nz + z)*ny + y)*nx + x.

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "symrec/voxgrid.hpp"

namespace symrec::graph {

struct Shape {
    int c = 1;
    int nx = 1;
    int ny = 1;
    int nz = 1;

    static Shape scalar() { return {}; }
    static Shape vector(int n) { return {n, 1, 1, 1}; }
    static Shape volume(int channels, Dims d) { return {channels, d.nx, d.ny, d.nz}; }

    std::size_t size() const { return static_cast<std::size_t>(c) * nx * ny * nz; }
    std::size_t voxels() const { return static_cast<std::size_t>(nx) * ny * nz; }
    Dims spatial() const { return {nx, ny, nz}; }
    bool operator==(const Shape&) const = default;
    std::string str() const;
};

class Tape;

// Handle to a node on a Tape. Cheap to copy; only valid while its Tape lives.
class Value {
public:
    Value() = default;

    int id() const { return id_; }
    Tape& tape() const { return *tape_; }
    bool valid() const { return tape_ != nullptr; }

    const Shape& shape() const;
    std::span<const double> data() const;
    double item() const;
    bool requires_grad() const;

private:
    friend class Tape;
    Value(Tape* tape, int id) : tape_(tape), id_(id) {}

    Tape* tape_ = nullptr;
    int id_ = -1;
};

class Tape {
public:
    using BackwardFn = std::function<void(Tape&, int self)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Value leaf(Shape shape, std::vector<double> data, bool requires_grad = true);
    Value constant(Shape shape, std::vector<double> data) { return leaf(shape, std::move(data), false); }
    Value constant(const Volume& v);
    Value leaf(const Volume& v, bool requires_grad = true);

    // Computes d(root)/d(node) for every node that requires grad. Safe to call
    // repeatedly; each call starts from zeroed gradients.
    void backward(Value root);

    // Gradient of the last backward() root w.r.t. v; zeros if v was unused.
    std::span<const double> grad(Value v);

    std::size_t size() const { return nodes_.size(); }

    // --- op-author interface ---
    Value record(const char* op, Shape shape, std::vector<double> value, std::vector<int> inputs, BackwardFn fn);
    const Shape& shape(int id) const { return nodes_[id].shape; }
    const std::vector<double>& value(int id) const { return nodes_[id].value; }
    const char* op(int id) const { return nodes_[id].op; }
    bool requires_grad(int id) const { return nodes_[id].requires_grad; }
    // Upstream gradient of node id during backward.
    const std::vector<double>& upstream(int id) const { return nodes_[id].grad; }
    // Gradient accumulator for an input; nullptr when it does not require grad.
    double* accumulator(int id);

private:
    struct Node {
        const char* op = "leaf";
        Shape shape;
        std::vector<double> value;
        std::vector<double> grad;
        std::vector<int> inputs;
        bool requires_grad = false;
        BackwardFn backward;
    };

    std::vector<Node> nodes_;
};

// Elementwise ops (matching shapes).
Value add(Value a, Value b);
Value mul(Value a, Value b);
Value maximum(Value a, Value b);  // ties route the gradient to a
Value scale(Value a, double s);
Value clamp01(Value a);
Value sigmoid(Value a);
Value leaky_relu(Value a, double slope = 0.01);

Value sum(Value a);
Value reshape(Value a, Shape shape);

// y = W x + b with W stored row-major (out x in) as a flat vector.
Value dense(Value x, Value weight, Value bias);

// 3x3x3 convolution, stride 1, zero padding 1. Weight layout
// [out][in][kz][ky][kx], flat.
Value conv3d(Value x, Value weight, Value bias);
Value avgpool2(Value x);
Value upsample2(Value x);

// Normalizes the first three components of a 4-vector; the fourth passes through.
Value vec_normalize(Value plane4);

// Backward warp of a single-channel volume by a 3-channel displacement
// field in voxel units: out(x) = vol(x + u(x)).
Value warp(Value vol, Value field);

// Reflection of a single-channel volume through the plane n.x = d where
// n = plane4[0..2] and d = n.anchor + offset_scale * plane4[3]:
// out(x) = vol(x - 2 (n.x - d) n). Differentiable in vol and plane4.
Value reflect(Value vol, Value plane4, Vec3 anchor, double offset_scale);

// Soft Dice loss 1 - (2 sum(ab) + eps) / (sum(a) + sum(b) + eps).
inline constexpr double kDiceEps = 1e-5;
Value dice_loss(Value a, Value b);

// (1/N) * sum over channels and axes of squared forward differences,
// N = voxel count, last-slice differences are zero.
Value diffusive_reg(Value field);

}  // namespace symrec::graph
