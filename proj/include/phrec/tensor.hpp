#ifndef PHREC_TENSOR_HPP
#define PHREC_TENSOR_HPP

#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "phrec/common.hpp"

namespace phrec {

// Dense row-major tensor. Rank 1 and 2 cover every op in this project.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<Real> values;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> s)
        : shape(std::move(s)),
          values(std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                                 std::multiplies<>()),
                 Real{0}) {}

    static Tensor matrix(std::size_t r, std::size_t c) { return Tensor({r, c}); }
    static Tensor vec(std::size_t n) { return Tensor({n}); }

    std::size_t count() const { return values.size(); }
    std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
    std::size_t cols() const { return shape.size() < 2 ? (shape.empty() ? 0 : 1) : shape[1]; }

    Real& at(std::size_t i) { return values[i]; }
    Real at(std::size_t i) const { return values[i]; }
    Real& at(std::size_t i, std::size_t j) { return values[i * cols() + j]; }
    Real at(std::size_t i, std::size_t j) const { return values[i * cols() + j]; }

    Real* row(std::size_t i) { return values.data() + i * cols(); }
    const Real* row(std::size_t i) const { return values.data() + i * cols(); }

    void zero() { std::fill(values.begin(), values.end(), Real{0}); }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
    std::string shape_str() const {
        std::string s = "[";
        for (std::size_t i = 0; i < shape.size(); ++i) {
            if (i) s += "x";
            s += std::to_string(shape[i]);
        }
        return s + "]";
    }
};

// Trainable tensor with its gradient accumulator and per-coordinate optimizer
// slots (Adam first/second moments; AdaGrad uses the first slot only).
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
    std::vector<Real> opt_m;
    std::vector<Real> opt_v;

    Parameter() = default;
    Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)) {
        grad = Tensor(value.shape);
    }

    void zero_grad() { grad.zero(); }
};

inline void check_dims(bool ok, const std::string& op, const std::string& detail) {
    if (!ok) throw UsageError(op + ": dimension mismatch: " + detail);
}

} // namespace phrec

#endif
