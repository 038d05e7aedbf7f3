#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "semvis/errors.hpp"
#include "semvis/random.hpp"

namespace semvis {

/// Dimension sizes, outermost first. An empty shape denotes a scalar.
using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

class Tape;

namespace detail {

struct TensorNode {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until something accumulates into it
    bool requires_grad = false;
    Tape* tape = nullptr;  // set when the tensor is the output of a recorded op
};

}  // namespace detail

/// Dense row-major array of doubles with optional gradient tracking.
///
/// A Tensor is a shared handle: copies alias the same buffer. Values produced
/// by an operation are never modified afterwards; only leaf tensors (model
/// parameters) are written in place, through mutable_data().
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> values);

    static Tensor scalar(double value);
    static Tensor vector(std::vector<double> values);
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

    bool defined() const noexcept { return node_ != nullptr; }

    const Shape& shape() const;
    std::size_t rank() const { return shape().size(); }
    std::size_t dim(std::size_t axis) const;
    std::size_t numel() const;

    std::span<const double> data() const;
    std::span<double> mutable_data();
    double item() const;
    double operator[](std::size_t flat_index) const { return data()[flat_index]; }

    bool requires_grad() const;
    Tensor& set_requires_grad(bool on);
    bool has_grad() const;
    std::span<const double> grad() const;
    void zero_grad();

    /// Value copy with no gradient tracking and no tape membership.
    Tensor detach() const;

    const std::shared_ptr<detail::TensorNode>& node() const { return node_; }

private:
    explicit Tensor(std::shared_ptr<detail::TensorNode> node) : node_(std::move(node)) {}

    std::shared_ptr<detail::TensorNode> node_;

    friend Tensor record_op(Shape, std::vector<double>, const std::vector<Tensor>&,
                            std::function<void(std::span<const double>)>);
};

using BackwardFn = std::function<void(std::span<const double> out_grad)>;

/// Wraps freshly computed values as an op result. When a tape is active and any
/// input requires gradients, the output is tracked and `backward` is recorded;
/// `backward` receives the output gradient and accumulates into its inputs via
/// grad_sink().
Tensor record_op(Shape shape, std::vector<double> values, const std::vector<Tensor>& inputs,
                 BackwardFn backward);

/// Gradient accumulator of `t`, allocated on first use; empty when `t` does not
/// track gradients.
std::span<double> grad_sink(const Tensor& t);

/// Ordered record of executed primitives. Entries are appended in execution
/// order, so every entry's inputs precede it and backward() is a reverse sweep.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;
    ~Tape();

    std::size_t size() const { return entries_.size(); }
    bool consumed() const { return consumed_; }

    void backward(const Tensor& loss);
    void reset();

private:
    struct Entry {
        std::shared_ptr<detail::TensorNode> output;
        BackwardFn backward;
    };

    std::vector<Entry> entries_;
    bool consumed_ = false;

    friend Tensor record_op(Shape, std::vector<double>, const std::vector<Tensor>&, BackwardFn);
};

/// Makes `tape` the calling thread's recording target for the scope's lifetime.
/// Passing nullptr suspends recording.
class TapeScope {
public:
    explicit TapeScope(Tape* tape);
    explicit TapeScope(Tape& tape) : TapeScope(&tape) {}
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;
    ~TapeScope();

private:
    Tape* previous_;
};

Tape* active_tape() noexcept;

/// Back-propagates from a scalar recorded on a tape.
void backward(const Tensor& loss);

// ---------------------------------------------------------------------------
// Primitives. Binary elementwise ops require identical shapes.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double offset);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);

Tensor sum(const Tensor& a);
/// Largest entry; gradient goes to the first maximal entry.
Tensor max_reduce_scalar(const Tensor& a);
Tensor dot(const Tensor& a, const Tensor& b);

/// Zeroes entries with probability p and rescales survivors by 1/(1-p) when
/// `training`; identity otherwise. The mask is a pure function of `key`.
Tensor dropout(const Tensor& a, double p, const DropoutKey& key, bool training);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor matvec(const Tensor& m, const Tensor& x);
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);

/// Rows of a 2-D tensor, and contiguous pieces of a 1-D one.
Tensor row(const Tensor& a, std::size_t index);
Tensor slice(const Tensor& a, std::size_t begin, std::size_t length);
/// Stacks equally shaped tensors along a new leading axis.
Tensor stack(const std::vector<Tensor>& items);
/// table[indices[t], :] for each t; gradient scatters back into the used rows.
Tensor gather_rows(const Tensor& table, std::span<const std::size_t> indices);

/// Cross-correlation of a C×H×W input with an O×C×kh×kw kernel.
Tensor conv2d(const Tensor& input, const Tensor& kernel, std::size_t stride, std::size_t pad);
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, std::size_t stride,
              std::size_t pad);

/// Per-channel max + min over the spatial grid of a C×h×w stack. Ties resolve
/// to the first cell in row-major order.
Tensor spatial_max_min(const Tensor& input);
/// Per-channel spatial mean of a C×h×w stack.
Tensor spatial_mean(const Tensor& input);

inline constexpr double kNormEpsilon = 1e-12;

/// input / ||input||_2 over all entries; throws DegenerateInputError when the
/// norm does not exceed kNormEpsilon.
Tensor l2_normalize(const Tensor& input);

// ---------------------------------------------------------------------------

/// Compares taped gradients of `f` w.r.t. `params` against central differences.
/// Returns the worst relative error |a - n| / max(|a|, |n|, 1e-8).
/// `f` must be deterministic.
double grad_check(const std::function<Tensor()>& f, std::span<Tensor> params, double step = 1e-6);

}  // namespace semvis
