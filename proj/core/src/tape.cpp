#include "tuber/tape.hpp"

namespace tuber {

template <typename S>
void GradTape<S>::record(std::function<void()> backward_fn) {
    nodes_.push_back(std::move(backward_fn));
}

template <typename S>
void GradTape<S>::backward_from(const TensorT<S>& loss) {
    if (consumed_) throw NumericalError("backward called twice on the same record; reset() first");
    if (!loss.defined() || loss.numel() != 1)
        throw ShapeError("backward: loss must be a scalar tensor");
    consumed_ = true;
    loss.data()->ensure_grad();
    loss.data()->grad[0] = S(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

template <typename S>
void GradTape<S>::reset() {
    nodes_.clear();
    consumed_ = false;
}

template <typename S>
GradTape<S>*& GradTape<S>::active_ptr() {
    thread_local GradTape<S> default_tape;
    thread_local GradTape<S>* current = &default_tape;
    return current;
}

template <typename S>
GradTape<S>& GradTape<S>::active() {
    return *active_ptr();
}

template class GradTape<float>;
template class GradTape<double>;

}  // namespace tuber
