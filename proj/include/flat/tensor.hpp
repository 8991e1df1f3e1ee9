#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace flat::ad {

/// Error thrown by ops on non-conforming input shapes. Carries the op name;
/// the message lists the offending shapes.
class ShapeError : public std::runtime_error {
public:
    ShapeError(std::string op, const std::string& detail)
        : std::runtime_error(op + ": " + detail), op_(std::move(op)) {}
    const std::string& op() const { return op_; }

private:
    std::string op_;
};

std::string shape_str(std::span<const int> shape);

/// Dense 64-bit float tensor. Copies are handles onto shared storage, so
/// backward closures can capture tensors cheaply. A tensor with allocated
/// grad storage participates in gradient accumulation; tensors without it
/// are treated as constants by every backward rule.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<int> shape);
    static Tensor full(std::vector<int> shape, double value);
    static Tensor from(std::vector<int> shape, std::vector<double> values);
    static Tensor scalar(double value);

    bool defined() const { return impl_ != nullptr; }
    const std::vector<int>& shape() const { return impl_->shape; }
    int ndim() const { return static_cast<int>(impl_->shape.size()); }
    int dim(int i) const { return impl_->shape[static_cast<std::size_t>(i)]; }
    std::int64_t numel() const { return static_cast<std::int64_t>(impl_->values.size()); }

    // Mutators are const-callable: a Tensor is a handle, mutation goes to
    // the shared storage (same model as shared_ptr).
    const std::vector<double>& values() const { return impl_->values; }
    /// Mutable access to values; bumps the version counter used by caches.
    std::vector<double>& values_mut() const {
        ++impl_->version;
        return impl_->values;
    }

    /// Allocates (or frees) grad storage. Grad-carrying tensors receive
    /// gradient contributions during backward; others do not.
    void set_tracked(bool on) const;
    bool has_grad() const { return impl_ && !impl_->grad.empty(); }
    const std::vector<double>& grad() const { return impl_->grad; }
    std::vector<double>& grad_mut() const { return impl_->grad; }
    void zero_grad() const;

    std::uint64_t version() const { return impl_->version; }
    void bump_version() const { ++impl_->version; }

    bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

private:
    struct Impl {
        std::vector<int> shape;
        std::vector<double> values;
        std::vector<double> grad;  // empty unless tracked
        std::uint64_t version = 0;
    };
    std::shared_ptr<Impl> impl_;
};

/// Reverse-mode tape. Ops append one backward closure per recorded node in
/// creation order, which is a topological order of the computation graph;
/// backward() replays them once in reverse. The tape is rebuilt per forward
/// pass (dynamic graph).
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    void record(std::function<void()> backward_fn) { nodes_.push_back(std::move(backward_fn)); }
    std::size_t size() const { return nodes_.size(); }
    bool spent() const { return spent_; }

    /// Seeds d(loss)/d(loss) = 1 and runs every node's backward rule exactly
    /// once, newest first. Throws if loss is not scalar or if the tape has
    /// already been consumed (re-run the forward pass first).
    void backward(Tensor loss);

    /// Discards recorded nodes so the tape can record a new forward pass.
    void reset() {
        nodes_.clear();
        spent_ = false;
    }

    /// Tape currently receiving op records on this thread, or nullptr.
    static Tape* active();

private:
    friend struct TapeScope;
    std::vector<std::function<void()>> nodes_;
    bool spent_ = false;
};

/// RAII activation of a tape on the current thread. Graphs are confined to
/// one thread; independent tapes may run on different threads concurrently.
struct TapeScope {
    explicit TapeScope(Tape& tape);
    ~TapeScope();
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

private:
    Tape* prev_;
};

/// RAII suspension of recording: ops inside run as plain numerics even when
/// an outer tape is active (pure inference inside a training step).
struct NoTapeScope {
    NoTapeScope();
    ~NoTapeScope();
    NoTapeScope(const NoTapeScope&) = delete;
    NoTapeScope& operator=(const NoTapeScope&) = delete;

private:
    Tape* prev_;
};

}  // namespace flat::ad
