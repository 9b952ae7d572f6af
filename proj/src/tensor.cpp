#include "refvid/tensor.hpp"

#include <cmath>
#include <sstream>

#include "refvid/error.hpp"

namespace refvid {

namespace precision {
namespace {
bool g_float64 = false;
}
void set_float64(bool on) { g_float64 = on; }
bool float64() { return g_float64; }
} // namespace precision

int64_t shape_numel(const std::vector<int>& shape) {
    int64_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw DimensionError("non-positive tensor extent in " + shape_str(shape));
        n *= d;
    }
    return n;
}

std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

Tensor::Tensor(std::vector<int> s) : shape(std::move(s)) {
    v.assign(static_cast<size_t>(shape_numel(shape)), 0.0);
}

Tensor Tensor::full(std::vector<int> s, double value) {
    Tensor t(std::move(s));
    t.fill(quantize(value));
    return t;
}

Tensor Tensor::from(std::vector<int> s, std::vector<double> data) {
    if (shape_numel(s) != static_cast<int64_t>(data.size()))
        throw DimensionError("data length " + std::to_string(data.size()) +
                             " does not match shape " + shape_str(s));
    Tensor t;
    t.shape = std::move(s);
    t.v = std::move(data);
    quantize(t);
    return t;
}

void Tensor::fill(double value) {
    for (double& x : v) x = value;
}

double quantize(double x) {
    if (precision::float64()) return x;
    return static_cast<double>(static_cast<float>(x));
}

void quantize(Tensor& t) {
    if (precision::float64()) return;
    for (double& x : t.v) x = static_cast<double>(static_cast<float>(x));
}

bool all_finite(const Tensor& t) {
    for (double x : t.v)
        if (!std::isfinite(x)) return false;
    return true;
}

} // namespace refvid
