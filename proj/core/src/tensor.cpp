#include "tuber/tensor.hpp"

#include <atomic>
#include <sstream>

#include "tuber/rng.hpp"

namespace tuber {

int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int64_t d : s) n *= d;
    return n;
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) os << ',';
        os << s[i];
    }
    os << ']';
    return os.str();
}

bool same_shape(const Shape& a, const Shape& b) { return a == b; }

namespace {
std::atomic<int64_t> g_current_bytes{0};
std::atomic<int64_t> g_peak_bytes{0};

void track_alloc(int64_t bytes) {
    int64_t cur = g_current_bytes.fetch_add(bytes) + bytes;
    int64_t peak = g_peak_bytes.load();
    while (cur > peak && !g_peak_bytes.compare_exchange_weak(peak, cur)) {
    }
}
}  // namespace

int64_t MemoryStats::current_bytes() { return g_current_bytes.load(); }
int64_t MemoryStats::peak_bytes() { return g_peak_bytes.load(); }
void MemoryStats::reset_peak() { g_peak_bytes.store(g_current_bytes.load()); }

namespace detail {

template <typename S>
TensorData<S>::TensorData(Shape s, std::vector<S> v) : shape(std::move(s)), values(std::move(v)) {
    if (shape_numel(shape) != static_cast<int64_t>(values.size()))
        throw ShapeError("tensor: " + shape_str(shape) + " does not hold " +
                         std::to_string(values.size()) + " values");
    track_alloc(static_cast<int64_t>(values.capacity() * sizeof(S)));
}

template <typename S>
TensorData<S>::~TensorData() {
    track_alloc(-static_cast<int64_t>((values.capacity() + grad.capacity()) * sizeof(S)));
}

template <typename S>
void TensorData<S>::ensure_grad() {
    if (grad.empty() && !values.empty()) {
        grad.assign(values.size(), S(0));
        track_alloc(static_cast<int64_t>(grad.capacity() * sizeof(S)));
    }
}

template struct TensorData<float>;
template struct TensorData<double>;

}  // namespace detail

template <typename S>
TensorT<S> TensorT<S>::zeros(Shape shape) {
    int64_t n = shape_numel(shape);
    return TensorT(std::make_shared<detail::TensorData<S>>(std::move(shape),
                                                           std::vector<S>(static_cast<size_t>(n))));
}

template <typename S>
TensorT<S> TensorT<S>::full(Shape shape, S value) {
    int64_t n = shape_numel(shape);
    return TensorT(std::make_shared<detail::TensorData<S>>(
        std::move(shape), std::vector<S>(static_cast<size_t>(n), value)));
}

template <typename S>
TensorT<S> TensorT<S>::from_values(Shape shape, std::vector<S> values) {
    return TensorT(std::make_shared<detail::TensorData<S>>(std::move(shape), std::move(values)));
}

template <typename S>
TensorT<S> TensorT<S>::scalar(S value) {
    return from_values({}, {value});
}

template <typename S>
TensorT<S> TensorT<S>::randn(Shape shape, Rng& rng, double stddev, double mean) {
    int64_t n = shape_numel(shape);
    std::vector<S> v(static_cast<size_t>(n));
    for (auto& x : v) x = static_cast<S>(rng.normal(mean, stddev));
    return from_values(std::move(shape), std::move(v));
}

template <typename S>
const Shape& TensorT<S>::shape() const {
    if (!d_) throw ShapeError("use of undefined tensor");
    return d_->shape;
}

template <typename S>
int64_t TensorT<S>::dim(int64_t i) const {
    const Shape& s = shape();
    int64_t n = static_cast<int64_t>(s.size());
    if (i < 0) i += n;
    if (i < 0 || i >= n) throw ShapeError("dim index " + std::to_string(i) + " out of range for " + shape_str(s));
    return s[static_cast<size_t>(i)];
}

template <typename S>
int64_t TensorT<S>::numel() const {
    return shape_numel(shape());
}

template <typename S>
std::span<const S> TensorT<S>::values() const& {
    if (!d_) throw ShapeError("use of undefined tensor");
    return {d_->values.data(), d_->values.size()};
}

template <typename S>
std::span<S> TensorT<S>::values_mut() & {
    if (!d_) throw ShapeError("use of undefined tensor");
    return {d_->values.data(), d_->values.size()};
}

template <typename S>
S TensorT<S>::item() const {
    if (numel() != 1) throw ShapeError("item(): tensor " + shape_str(shape()) + " is not scalar");
    return d_->values[0];
}

template <typename S>
S TensorT<S>::at(const std::vector<int64_t>& idx) const {
    const Shape& s = shape();
    if (idx.size() != s.size()) throw ShapeError("at(): rank mismatch for " + shape_str(s));
    int64_t flat = 0;
    for (size_t i = 0; i < s.size(); ++i) {
        if (idx[i] < 0 || idx[i] >= s[i]) throw ShapeError("at(): index out of range for " + shape_str(s));
        flat = flat * s[i] + idx[i];
    }
    return d_->values[static_cast<size_t>(flat)];
}

template <typename S>
bool TensorT<S>::requires_grad() const {
    return d_ && d_->requires_grad;
}

template <typename S>
TensorT<S>& TensorT<S>::set_requires_grad(bool v) {
    if (!d_) throw ShapeError("use of undefined tensor");
    d_->requires_grad = v;
    return *this;
}

template <typename S>
bool TensorT<S>::has_grad() const {
    return d_ && !d_->grad.empty();
}

template <typename S>
std::span<const S> TensorT<S>::grad() const {
    if (!d_) throw ShapeError("use of undefined tensor");
    return {d_->grad.data(), d_->grad.size()};
}

template <typename S>
std::span<S> TensorT<S>::grad_mut() {
    if (!d_) throw ShapeError("use of undefined tensor");
    d_->ensure_grad();
    return {d_->grad.data(), d_->grad.size()};
}

template <typename S>
void TensorT<S>::zero_grad() {
    if (d_ && !d_->grad.empty()) std::fill(d_->grad.begin(), d_->grad.end(), S(0));
}

template <typename S>
TensorT<S> TensorT<S>::clone() const {
    return from_values(shape(), std::vector<S>(d_->values));
}

template <typename S>
TensorT<S> TensorT<S>::detached() const {
    TensorT t = clone();
    t.d_->requires_grad = false;
    return t;
}

template class TensorT<float>;
template class TensorT<double>;

}  // namespace tuber
