#include "semvis/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace semvis {

namespace {

thread_local Tape* g_active_tape = nullptr;

}  // namespace

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) {
        n *= d;
    }
    return n;
}

std::string shape_string(const Shape& shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i > 0) {
            out += "x";
        }
        out += std::to_string(shape[i]);
    }
    return out + "]";
}

std::string Rng::state() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
}

void Rng::restore(const std::string& state) {
    std::istringstream is(state);
    is >> engine_;
    if (is.fail()) {
        throw FormatError("invalid generator state");
    }
}

// ---------------------------------------------------------------------------
// Tensor

Tensor::Tensor(Shape shape, double fill) : node_(std::make_shared<detail::TensorNode>()) {
    for (std::size_t d : shape) {
        if (d == 0) {
            throw DimensionError("tensor dimensions must be positive, got " + shape_string(shape));
        }
    }
    node_->data.assign(shape_numel(shape), fill);
    node_->shape = std::move(shape);
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : node_(std::make_shared<detail::TensorNode>()) {
    for (std::size_t d : shape) {
        if (d == 0) {
            throw DimensionError("tensor dimensions must be positive, got " + shape_string(shape));
        }
    }
    if (shape_numel(shape) != values.size()) {
        throw DimensionError("shape " + shape_string(shape) + " does not hold " +
                             std::to_string(values.size()) + " values");
    }
    node_->shape = std::move(shape);
    node_->data = std::move(values);
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{}, std::vector<double>{value}); }

Tensor Tensor::vector(std::vector<double> values) {
    const std::size_t n = values.size();
    return Tensor(Shape{n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
    return Tensor(Shape{rows, cols}, std::move(values));
}

const Shape& Tensor::shape() const {
    if (!node_) {
        throw ContractError("use of an undefined tensor");
    }
    return node_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
    const Shape& s = shape();
    if (axis >= s.size()) {
        throw DimensionError("axis " + std::to_string(axis) + " out of range for " +
                             shape_string(s));
    }
    return s[axis];
}

std::size_t Tensor::numel() const { return shape_numel(shape()); }

std::span<const double> Tensor::data() const {
    shape();
    return node_->data;
}

std::span<double> Tensor::mutable_data() {
    shape();
    return node_->data;
}

double Tensor::item() const {
    if (numel() != 1) {
        throw DimensionError("item() on non-scalar tensor " + shape_string(shape()));
    }
    return node_->data[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool on) {
    shape();
    node_->requires_grad = on;
    return *this;
}

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::span<const double> Tensor::grad() const {
    shape();
    return node_->grad;
}

void Tensor::zero_grad() {
    if (node_) {
        node_->grad.clear();
    }
}

Tensor Tensor::detach() const { return Tensor(shape(), node_->data); }

// ---------------------------------------------------------------------------
// Tape

Tensor record_op(Shape shape, std::vector<double> values, const std::vector<Tensor>& inputs,
                 BackwardFn backward) {
    Tensor out(std::move(shape), std::move(values));
    Tape* tape = g_active_tape;
    if (tape == nullptr) {
        return out;
    }
    const bool tracked = std::any_of(inputs.begin(), inputs.end(),
                                     [](const Tensor& t) { return t.requires_grad(); });
    if (!tracked) {
        return out;
    }
    if (tape->consumed_) {
        throw ContractError("recording onto a tape that was already back-propagated; reset it first");
    }
    out.node_->requires_grad = true;
    out.node_->tape = tape;
    tape->entries_.push_back({out.node_, std::move(backward)});
    return out;
}

std::span<double> grad_sink(const Tensor& t) {
    if (!t.requires_grad()) {
        return {};
    }
    auto& node = *t.node();
    if (node.grad.empty()) {
        node.grad.assign(node.data.size(), 0.0);
    }
    return node.grad;
}

Tape::~Tape() { reset(); }

void Tape::reset() {
    for (auto& e : entries_) {
        if (e.output->tape == this) {
            e.output->tape = nullptr;
        }
    }
    entries_.clear();
    consumed_ = false;
}

void Tape::backward(const Tensor& loss) {
    if (!loss.defined() || loss.numel() != 1) {
        throw ContractError("backward() needs a scalar loss, got " +
                            (loss.defined() ? shape_string(loss.shape()) : std::string("undefined")));
    }
    if (loss.node()->tape != this) {
        throw ContractError("backward(): loss was not recorded on this tape");
    }
    if (consumed_) {
        throw ContractError("backward() called twice on the same tape without reset()");
    }
    consumed_ = true;
    grad_sink(loss)[0] += 1.0;
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
        if (it->output->grad.empty()) {
            continue;  // not reachable from the loss
        }
        it->backward(it->output->grad);
    }
}

TapeScope::TapeScope(Tape* tape) : previous_(g_active_tape) { g_active_tape = tape; }

TapeScope::~TapeScope() { g_active_tape = previous_; }

Tape* active_tape() noexcept { return g_active_tape; }

void backward(const Tensor& loss) {
    if (!loss.defined() || loss.numel() != 1) {
        throw ContractError("backward() needs a scalar loss");
    }
    Tape* tape = loss.node()->tape;
    if (tape == nullptr) {
        throw ContractError("backward(): loss is not on a tape");
    }
    tape->backward(loss);
}

// ---------------------------------------------------------------------------

double grad_check(const std::function<Tensor()>& f, std::span<Tensor> params, double step) {
    std::vector<bool> previous;
    previous.reserve(params.size());
    for (auto& p : params) {
        previous.push_back(p.requires_grad());
        p.set_requires_grad(true);
        p.zero_grad();
    }

    std::vector<std::vector<double>> analytic;
    {
        Tape tape;
        Tensor loss;
        {
            TapeScope scope(tape);
            loss = f();
        }
        tape.backward(loss);
        for (auto& p : params) {
            if (p.has_grad()) {
                analytic.emplace_back(p.grad().begin(), p.grad().end());
            } else {
                analytic.emplace_back(p.numel(), 0.0);
            }
        }
    }

    double worst = 0.0;
    TapeScope no_tape(nullptr);
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto values = params[k].mutable_data();
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double original = values[i];
            values[i] = original + step;
            const double up = f().item();
            values[i] = original - step;
            const double down = f().item();
            values[i] = original;
            const double numeric = (up - down) / (2.0 * step);
            const double a = analytic[k][i];
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
            worst = std::max(worst, std::abs(a - numeric) / denom);
        }
    }

    for (std::size_t k = 0; k < params.size(); ++k) {
        params[k].zero_grad();
        params[k].set_requires_grad(previous[k]);
    }
    return worst;
}

}  // namespace semvis
