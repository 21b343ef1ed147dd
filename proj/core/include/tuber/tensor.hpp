#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "tuber/errors.hpp"

namespace tuber {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);
bool same_shape(const Shape& a, const Shape& b);

// Process-wide tally of live tensor buffer bytes. bench-attention uses the
// high-water mark to compare factorized vs. full attention footprints.
struct MemoryStats {
    static int64_t current_bytes();
    static int64_t peak_bytes();
    static void reset_peak();
};

class Rng;

namespace detail {

template <typename S>
struct TensorData {
    Shape shape;
    std::vector<S> values;
    std::vector<S> grad;  // empty until first accumulation
    bool requires_grad = false;

    TensorData(Shape s, std::vector<S> v);
    ~TensorData();
    TensorData(const TensorData&) = delete;
    TensorData& operator=(const TensorData&) = delete;

    void ensure_grad();
};

}  // namespace detail

// Dense row-major tensor. Copies share the underlying buffer; values are
// treated as immutable once the tensor has entered a recorded computation.
template <typename S>
class TensorT {
public:
    using value_type = S;

    TensorT() = default;

    static TensorT zeros(Shape shape);
    static TensorT full(Shape shape, S value);
    static TensorT from_values(Shape shape, std::vector<S> values);
    static TensorT scalar(S value);
    static TensorT randn(Shape shape, Rng& rng, double stddev = 1.0, double mean = 0.0);

    bool defined() const { return static_cast<bool>(d_); }
    const Shape& shape() const;
    int64_t ndim() const { return static_cast<int64_t>(shape().size()); }
    int64_t dim(int64_t i) const;  // negative indices count from the back
    int64_t numel() const;

    // Spans view the shared buffer; calling on a temporary would dangle once
    // the last owner dies, so rvalue access is rejected.
    std::span<const S> values() const&;
    std::span<const S> values() const&& = delete;
    // In-place access, for parameter init and optimizer updates only.
    std::span<S> values_mut() &;
    std::span<S> values_mut() && = delete;

    S item() const;  // scalar tensors only
    S at(const std::vector<int64_t>& idx) const;

    bool requires_grad() const;
    TensorT& set_requires_grad(bool v);
    bool has_grad() const;
    std::span<const S> grad() const;
    std::span<S> grad_mut();  // allocates zeroed buffer on first use
    void zero_grad();

    TensorT clone() const;     // deep copy, no grad state
    TensorT detached() const;  // deep copy with requires_grad = false

    std::shared_ptr<detail::TensorData<S>> data() const { return d_; }

private:
    explicit TensorT(std::shared_ptr<detail::TensorData<S>> d) : d_(std::move(d)) {}
    std::shared_ptr<detail::TensorData<S>> d_;
};

using Tensor = TensorT<float>;
using Tensor64 = TensorT<double>;

}  // namespace tuber
