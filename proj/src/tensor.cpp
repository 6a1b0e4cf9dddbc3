#include "toktrans/tensor.hpp"

#include <cmath>
#include <sstream>

namespace toktrans {

namespace {
Precision g_precision = Precision::F64;
}

Precision default_precision() { return g_precision; }
void set_default_precision(Precision p) { g_precision = p; }

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string shape_str(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << "]";
    return os.str();
}

Tensor::Tensor(std::vector<std::size_t> s, std::vector<double> d)
    : shape(std::move(s)), data(std::move(d)) {
    if (shape_numel(shape) != data.size())
        throw ConfigError("tensor shape " + shape_str(shape) + " does not match data length");
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
    std::size_t n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
    std::size_t n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
    std::vector<double> d;
    std::size_t r = rows.size(), c = rows.begin()->size();
    for (const auto& row : rows) {
        if (row.size() != c) throw ConfigError("ragged matrix literal");
        d.insert(d.end(), row.begin(), row.end());
    }
    return Tensor({r, c}, std::move(d));
}

Tensor Tensor::vector1d(std::vector<double> v) {
    std::size_t n = v.size();
    return Tensor({n}, std::move(v));
}

Tensor Tensor::randn(std::vector<std::size_t> shape, Rng& rng, double stddev) {
    Tensor t = zeros(std::move(shape));
    std::normal_distribution<double> dist(0.0, stddev);
    for (auto& x : t.data) x = dist(rng);
    return t;
}

Tensor Tensor::identity(std::size_t n) {
    Tensor t = zeros({n, n});
    for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
    return t;
}

bool Tensor::all_finite() const {
    for (double x : data)
        if (!std::isfinite(x)) return false;
    return true;
}

void Tensor::apply_precision() {
    if (g_precision == Precision::F32)
        for (auto& x : data) x = static_cast<double>(static_cast<float>(x));
}

void check_finite(const Tensor& t, const char* what) {
    if (!t.all_finite())
        throw NumericalError(std::string(what) + " produced a non-finite value");
}

}  // namespace toktrans
