#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "toktrans/common.hpp"

namespace toktrans {

// Storage precision for op results. Values are always held as double; in
// F32 mode every op output is rounded through float, giving 32-bit effective
// precision without a second code path.
enum class Precision { F64, F32 };

Precision default_precision();
void set_default_precision(Precision p);

// Dense row-major tensor. Immutable by convention once handed to a Tape.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;
    bool requires_grad = false;

    Tensor() = default;
    Tensor(std::vector<std::size_t> s, std::vector<double> d);

    static Tensor zeros(std::vector<std::size_t> shape);
    static Tensor full(std::vector<std::size_t> shape, double value);
    static Tensor scalar(double value);
    static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
    static Tensor vector1d(std::vector<double> v);
    static Tensor randn(std::vector<std::size_t> shape, Rng& rng, double stddev = 1.0);
    static Tensor identity(std::size_t n);

    std::size_t size() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }
    bool is_scalar() const { return data.size() == 1 && shape.size() <= 1; }
    double scalar_value() const { return data[0]; }

    std::size_t rows() const { return shape.at(0); }
    std::size_t cols() const { return shape.at(1); }
    double& at(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
    bool all_finite() const;
    // Rounds through float when the default precision is F32.
    void apply_precision();
};

std::size_t shape_numel(const std::vector<std::size_t>& shape);
std::string shape_str(const std::vector<std::size_t>& shape);

// Throws NumericalError if t contains NaN/Inf; `what` names the producing op.
void check_finite(const Tensor& t, const char* what);

}  // namespace toktrans
