#include "flat/tensor.hpp"

#include <numeric>
#include <sstream>

namespace flat::ad {

namespace {
thread_local Tape* g_active_tape = nullptr;

std::int64_t shape_numel(const std::vector<int>& shape) {
    std::int64_t n = 1;
    for (int d : shape) {
        if (d < 0) throw std::invalid_argument("tensor shape has negative dimension");
        n *= d;
    }
    return n;
}
}  // namespace

std::string shape_str(std::span<const int> shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

Tensor Tensor::zeros(std::vector<int> shape) {
    Tensor t;
    t.impl_ = std::make_shared<Impl>();
    const auto n = shape_numel(shape);
    t.impl_->shape = std::move(shape);
    t.impl_->values.assign(static_cast<std::size_t>(n), 0.0);
    return t;
}

Tensor Tensor::full(std::vector<int> shape, double value) {
    Tensor t = zeros(std::move(shape));
    for (auto& v : t.impl_->values) v = value;
    return t;
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> values) {
    const auto n = shape_numel(shape);
    if (static_cast<std::int64_t>(values.size()) != n) {
        throw std::invalid_argument("tensor: values length " + std::to_string(values.size()) +
                                    " does not match shape " + shape_str(shape));
    }
    Tensor t;
    t.impl_ = std::make_shared<Impl>();
    t.impl_->shape = std::move(shape);
    t.impl_->values = std::move(values);
    return t;
}

Tensor Tensor::scalar(double value) { return from({1}, {value}); }

void Tensor::set_tracked(bool on) const {
    if (!impl_) throw std::logic_error("set_tracked on undefined tensor");
    if (on) {
        impl_->grad.assign(impl_->values.size(), 0.0);
    } else {
        impl_->grad.clear();
    }
}

void Tensor::zero_grad() const {
    if (impl_ && !impl_->grad.empty()) {
        std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
    }
}

Tape* Tape::active() { return g_active_tape; }

void Tape::backward(Tensor loss) {
    if (!loss.defined() || loss.numel() != 1) {
        throw std::invalid_argument("backward: loss must be a scalar tensor" +
                                    (loss.defined() ? ", got shape " + shape_str(loss.shape()) : std::string()));
    }
    if (spent_) {
        throw std::logic_error("backward: tape already consumed; re-run the forward pass");
    }
    if (!loss.has_grad()) loss.set_tracked(true);
    loss.grad_mut()[0] = 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
    spent_ = true;
}

TapeScope::TapeScope(Tape& tape) : prev_(g_active_tape) { g_active_tape = &tape; }

TapeScope::~TapeScope() { g_active_tape = prev_; }

NoTapeScope::NoTapeScope() : prev_(g_active_tape) { g_active_tape = nullptr; }

NoTapeScope::~NoTapeScope() { g_active_tape = prev_; }

}  // namespace flat::ad
