#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dfr/errors.hpp"

namespace dfr {

using Shape = std::vector<int>;

std::int64_t numel_of(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Deterministic RNG. The uint64 -> double mapping is done by hand so a
/// given seed produces the same stream on every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) {
        const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
        return lo + u * (hi - lo);
    }

    /// Standard normal via Box-Muller.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform(0.0, 1.0);
        double u2 = uniform(0.0, 1.0);
        while (u1 <= 1e-300) u1 = uniform(0.0, 1.0);
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    /// Integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return engine_() % n; }

private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

/// Dense row-major tensor of doubles with optional reverse-mode gradient
/// tracking. Copies of a Tensor share the same node, so the handle is cheap
/// to pass around; operations executed on tracked tensors record enough to
/// replay adjoints when backward() runs on a downstream scalar.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);
    static Tensor uniform(Shape shape, Rng& rng, double lo, double hi, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    int rank() const { return static_cast<int>(shape().size()); }
    std::int64_t numel() const;

    const std::vector<double>& data() const;
    std::vector<double>& data();

    /// Value of a single-element tensor.
    double item() const;
    double at(std::initializer_list<int> index) const;

    bool requires_grad() const;
    bool has_grad() const;
    const std::vector<double>& grad() const;
    void zero_grad();

    /// Reverse sweep from a scalar: populates grad on every tracked tensor
    /// this one depends on, accumulating across shared uses. The recording
    /// that drove the sweep is dropped afterwards.
    void backward() const;

    /// Identity of the underlying node (for bitwise aliasing checks in tests).
    const void* node_id() const { return node_.get(); }

    struct Node;

private:
    friend struct OpAccess;
    explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
    std::shared_ptr<Node> node_;
};

enum class Padding { same, valid };

// ---- differentiable operations ----

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose2d(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);
Tensor softmax(const Tensor& a, int axis);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor add_const(const Tensor& a, double c);
/// s (single-element, possibly tracked) times every element of a.
Tensor scale_by(const Tensor& s, const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor exp_elem(const Tensor& a);
Tensor log_elem(const Tensor& a);
Tensor relu(const Tensor& a);

/// Patch-unrolling of a [C,H,W] input for a k x k kernel; the convolution is
/// then a plain matrix product against the unrolled patches.
Tensor im2col(const Tensor& input, int k, Padding padding);
/// Cross-correlation, stride 1, kernel [C_out,C_in,k,k] with k in {1,3}.
/// bias may be undefined; when given it is added per output channel.
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, Padding padding);
Tensor global_avg_pool(const Tensor& input);

Tensor sum_all(const Tensor& a);
Tensor slice_flat(const Tensor& a, int offset, int len);
/// Channel column at spatial position (row, col) of a [C,H,W] tensor -> [C].
Tensor spatial_column(const Tensor& a, int row, int col);
/// m[r][c] + bias[r] for a [R,C] matrix and [R] bias.
Tensor add_row_bias(const Tensor& m, const Tensor& bias);

/// Central-difference gradient estimate of a scalar function; the oracle the
/// reverse-mode path is checked against.
Tensor finite_difference_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                              double h);

}  // namespace dfr
