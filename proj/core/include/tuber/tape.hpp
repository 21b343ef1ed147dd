#pragma once

#include <functional>
#include <vector>

#include "tuber/tensor.hpp"

namespace tuber {

// Define-by-run record of executed operations. Execution order is a
// topological order of the graph, so backward is a single reverse sweep where
// each recorded node runs exactly once.
template <typename S>
class GradTape {
public:
    void record(std::function<void()> backward_fn);

    // Seeds loss.grad = 1 and runs every recorded node in reverse order.
    // loss must be scalar; a second call without reset() is an error.
    void backward_from(const TensorT<S>& loss);

    void reset();
    size_t size() const { return nodes_.size(); }
    bool consumed() const { return consumed_; }

    bool recording() const { return disabled_depth_ == 0; }
    void push_disabled() { ++disabled_depth_; }
    void pop_disabled() { --disabled_depth_; }

    // Thread-local active tape. TapeScope swaps it for nested work.
    static GradTape& active();

private:
    std::vector<std::function<void()>> nodes_;
    bool consumed_ = false;
    int disabled_depth_ = 0;

    template <typename>
    friend class TapeScope;
    static GradTape*& active_ptr();
};

// Installs a fresh tape for the lifetime of the scope (grad checks, nested
// evaluations). Restores the previous tape on destruction.
template <typename S>
class TapeScope {
public:
    TapeScope() : prev_(GradTape<S>::active_ptr()) { GradTape<S>::active_ptr() = &tape_; }
    ~TapeScope() { GradTape<S>::active_ptr() = prev_; }
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;
    GradTape<S>& tape() { return tape_; }

private:
    GradTape<S> tape_;
    GradTape<S>* prev_;
};

// Suspends recording on the active tape (inference mode).
template <typename S>
class NoGradGuardT {
public:
    NoGradGuardT() { GradTape<S>::active().push_disabled(); }
    ~NoGradGuardT() { GradTape<S>::active().pop_disabled(); }
    NoGradGuardT(const NoGradGuardT&) = delete;
    NoGradGuardT& operator=(const NoGradGuardT&) = delete;
};

// Suspends recording for both scalar types (inference, metric code).
class NoGradGuard {
    NoGradGuardT<float> f_;
    NoGradGuardT<double> d_;
};

template <typename S>
void backward(const TensorT<S>& loss) {
    GradTape<S>::active().backward_from(loss);
}

}  // namespace tuber
