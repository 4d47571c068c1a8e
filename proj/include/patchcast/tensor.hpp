#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "patchcast/errors.hpp"
#include "patchcast/rng.hpp"

namespace patchcast {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

// Backing storage for one tensor. Shared between Tensor handles; the tape
// holds references to keep intermediates alive until backward has run.
struct TensorNode {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;    // empty until the backward pass touches it
    bool requires_grad = false;  // leaf parameter flag
    bool tracked = false;        // produced by a recorded op on the active tape

    void ensure_grad() {
        if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
    }
};

// Dense float64 tensor, row-major. Value-semantic handle over shared storage.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from_vector(Shape shape, std::vector<double> data, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);
    static Tensor uniform(Shape shape, double lo, double hi, Rng& rng, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t ndim() const { return node_->shape.size(); }
    std::size_t dim(std::size_t i) const { return node_->shape[i]; }
    std::size_t size() const { return node_->values.size(); }

    std::span<double> data() { return node_->values; }
    std::span<const double> data() const { return node_->values; }

    double& at(std::initializer_list<std::size_t> idx);
    double at(std::initializer_list<std::size_t> idx) const;
    // Scalar value; throws unless size() == 1.
    double item() const;

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool v) { node_->requires_grad = v; }
    bool tracked() const { return node_->tracked; }

    bool has_grad() const { return !node_->grad.empty(); }
    std::span<const double> grad() const;
    std::span<double> grad_mut();
    void zero_grad();

    bool all_finite() const;

    // Deep copy; the copy is untracked and keeps requires_grad = false.
    Tensor clone() const;

    const std::shared_ptr<TensorNode>& node() const { return node_; }
    static Tensor wrap(std::shared_ptr<TensorNode> node) { return Tensor(std::move(node)); }

private:
    explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}
    std::shared_ptr<TensorNode> node_;
};

// One recorded operation: inputs always precede the op on the tape, so tape
// order is a topological order of the computation graph.
struct TapeOp {
    const char* kind;
    std::vector<std::shared_ptr<TensorNode>> inputs;
    std::shared_ptr<TensorNode> output;
    std::function<void()> backward;  // accumulates d(output) into d(inputs)
};

// Reverse-mode tape. Constructing one makes it the active recording target
// for the current thread; ops append themselves while any of their inputs
// requires gradients. backward() sweeps the list once, in reverse.
class Tape {
public:
    Tape();
    ~Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    static Tape* active();

    void record(TapeOp op);
    std::size_t size() const { return ops_.size(); }

    // Seeds d(loss) = 1 and propagates gradients to every contributing
    // tensor. loss must be a scalar produced by this tape.
    void backward(const Tensor& loss);

private:
    std::vector<TapeOp> ops_;
    Tape* prev_ = nullptr;
};

// True when `t` should flow gradients: a leaf parameter or an intermediate
// recorded on the active tape.
inline bool needs_grad(const Tensor& t) {
    return t.requires_grad() || t.tracked();
}

// Checked mode: when enabled, every op verifies its output is finite.
void set_finite_checks(bool on);
bool finite_checks_enabled();

}  // namespace patchcast
