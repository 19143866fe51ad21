#include "symrec/graph.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "symrec/errors.hpp"

namespace symrec::graph {

std::string Shape::str() const {
    std::ostringstream os;
    os << "[" << c << "," << nx << "," << ny << "," << nz << "]";
    return os.str();
}

const Shape& Value::shape() const { return tape_->shape(id_); }

std::span<const double> Value::data() const { return tape_->value(id_); }

double Value::item() const {
    if (shape().size() != 1) throw std::invalid_argument("item() on non-scalar value " + shape().str());
    return data()[0];
}

bool Value::requires_grad() const { return tape_->requires_grad(id_); }

Value Tape::leaf(Shape shape, std::vector<double> data, bool requires_grad) {
    if (data.size() != shape.size()) {
        throw std::invalid_argument("leaf: data size " + std::to_string(data.size()) + " does not match shape " +
                                    shape.str());
    }
    Node node;
    node.shape = shape;
    node.value = std::move(data);
    node.requires_grad = requires_grad;
    for (double v : node.value) {
        if (!std::isfinite(v)) throw NumericalError("leaf " + std::to_string(nodes_.size()) + " holds non-finite data");
    }
    nodes_.push_back(std::move(node));
    return Value(this, static_cast<int>(nodes_.size()) - 1);
}

Value Tape::constant(const Volume& v) { return leaf(v, false); }

Value Tape::leaf(const Volume& v, bool requires_grad) {
    return leaf(Shape::volume(1, v.dims()), v.to_vector(), requires_grad);
}

Value Tape::record(const char* op, Shape shape, std::vector<double> value, std::vector<int> inputs, BackwardFn fn) {
    const int id = static_cast<int>(nodes_.size());
    for (double v : value) {
        if (!std::isfinite(v)) {
            throw NumericalError(std::string("node ") + std::to_string(id) + " (" + op + ") produced a non-finite value");
        }
    }
    Node node;
    node.op = op;
    node.shape = shape;
    node.value = std::move(value);
    node.inputs = std::move(inputs);
    for (int in : node.inputs) node.requires_grad = node.requires_grad || nodes_[in].requires_grad;
    if (node.requires_grad) node.backward = std::move(fn);
    nodes_.push_back(std::move(node));
    return Value(this, id);
}

double* Tape::accumulator(int id) {
    Node& node = nodes_[id];
    if (!node.requires_grad) return nullptr;
    if (node.grad.size() != node.value.size()) node.grad.assign(node.value.size(), 0.0);
    return node.grad.data();
}

void Tape::backward(Value root) {
    if (root.tape_ != this) throw std::invalid_argument("backward: value belongs to another tape");
    if (nodes_[root.id()].shape.size() != 1) {
        throw std::invalid_argument("backward: root must be scalar, got " + nodes_[root.id()].shape.str());
    }
    for (auto& node : nodes_) node.grad.clear();
    if (!nodes_[root.id()].requires_grad) return;
    nodes_[root.id()].grad.assign(1, 1.0);
    for (int id = root.id(); id >= 0; --id) {
        Node& node = nodes_[id];
        if (!node.requires_grad || node.grad.empty() || !node.backward) continue;
        node.backward(*this, id);
    }
    for (std::size_t id = 0; id < nodes_.size(); ++id) {
        for (double g : nodes_[id].grad) {
            if (!std::isfinite(g)) {
                throw NumericalError("backward: non-finite gradient at node " + std::to_string(id) + " (" +
                                     nodes_[id].op + ")");
            }
        }
    }
}

std::span<const double> Tape::grad(Value v) {
    Node& node = nodes_[v.id()];
    if (node.grad.size() != node.value.size()) node.grad.assign(node.value.size(), 0.0);
    return node.grad;
}

}  // namespace symrec::graph
