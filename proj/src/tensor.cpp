#include "patchcast/tensor.hpp"

#include <cmath>
#include <sstream>

namespace patchcast {

namespace {
thread_local Tape* g_active_tape = nullptr;
bool g_finite_checks = false;
}  // namespace

std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << ',';
        os << s[i];
    }
    os << ']';
    return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    auto node = std::make_shared<TensorNode>();
    node->values.assign(shape_numel(shape), value);
    node->shape = std::move(shape);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::from_vector(Shape shape, std::vector<double> data, bool requires_grad) {
    if (shape_numel(shape) != data.size())
        throw ShapeError("from_vector: shape " + shape_str(shape) + " does not match data length " +
                         std::to_string(data.size()));
    auto node = std::make_shared<TensorNode>();
    node->shape = std::move(shape);
    node->values = std::move(data);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from_vector({1}, {value}, requires_grad);
}

Tensor Tensor::uniform(Shape shape, double lo, double hi, Rng& rng, bool requires_grad) {
    auto t = zeros(std::move(shape), requires_grad);
    for (double& v : t.data()) v = rng.uniform(lo, hi);
    return t;
}

static std::size_t flat_index(const Shape& shape, std::initializer_list<std::size_t> idx) {
    if (idx.size() != shape.size())
        throw ShapeError("index rank " + std::to_string(idx.size()) + " does not match tensor rank " +
                         std::to_string(shape.size()));
    std::size_t flat = 0;
    std::size_t axis = 0;
    for (std::size_t i : idx) {
        if (i >= shape[axis]) throw ShapeError("index out of range on axis " + std::to_string(axis));
        flat = flat * shape[axis] + i;
        ++axis;
    }
    return flat;
}

double& Tensor::at(std::initializer_list<std::size_t> idx) {
    return node_->values[flat_index(node_->shape, idx)];
}

double Tensor::at(std::initializer_list<std::size_t> idx) const {
    return node_->values[flat_index(node_->shape, idx)];
}

double Tensor::item() const {
    if (size() != 1) throw ShapeError("item(): tensor has " + std::to_string(size()) + " elements, expected 1");
    return node_->values[0];
}

std::span<const double> Tensor::grad() const {
    return node_->grad;
}

std::span<double> Tensor::grad_mut() {
    node_->ensure_grad();
    return node_->grad;
}

void Tensor::zero_grad() {
    if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

bool Tensor::all_finite() const {
    for (double v : node_->values)
        if (!std::isfinite(v)) return false;
    return true;
}

Tensor Tensor::clone() const {
    auto node = std::make_shared<TensorNode>();
    node->shape = node_->shape;
    node->values = node_->values;
    return Tensor(std::move(node));
}

Tape::Tape() : prev_(g_active_tape) {
    g_active_tape = this;
}

Tape::~Tape() {
    g_active_tape = prev_;
}

Tape* Tape::active() {
    return g_active_tape;
}

void Tape::record(TapeOp op) {
    op.output->tracked = true;
    ops_.push_back(std::move(op));
}

void Tape::backward(const Tensor& loss) {
    if (!loss.defined() || loss.size() != 1)
        throw ShapeError("backward: loss must be a scalar tensor");
    bool produced_here = false;
    for (const auto& op : ops_) {
        if (op.output == loss.node()) {
            produced_here = true;
            break;
        }
    }
    if (!produced_here) throw ShapeError("backward: loss was not produced by this graph");

    loss.node()->ensure_grad();
    loss.node()->grad[0] = 1.0;

    // Reverse sweep; every node visited exactly once. Ops whose output never
    // received a gradient are off the path to the loss and contribute zero.
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
        if (!it->output->grad.empty()) it->backward();
    }
}

void set_finite_checks(bool on) {
    g_finite_checks = on;
}

bool finite_checks_enabled() {
    return g_finite_checks;
}

}  // namespace patchcast
