#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace refvid {

// Numeric precision mode. Normal runs keep every stored value at float32
// precision; gradient checking switches the process to full float64.
namespace precision {
void set_float64(bool on);
bool float64();

// RAII switch for tests and the gradient checker.
struct Scoped64 {
    bool prev;
    explicit Scoped64(bool on = true) : prev(float64()) { set_float64(on); }
    ~Scoped64() { set_float64(prev); }
};
} // namespace precision

/// Dense row-major tensor of real values.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> v;

    Tensor() = default;
    explicit Tensor(std::vector<int> s);

    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
    static Tensor full(std::vector<int> s, double value);
    static Tensor from(std::vector<int> s, std::vector<double> data);
    static Tensor scalar(double value) { return from({1}, {value}); }

    int64_t numel() const { return static_cast<int64_t>(v.size()); }
    int rank() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<size_t>(i)]; }
    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    double& operator[](int64_t i) { return v[static_cast<size_t>(i)]; }
    double operator[](int64_t i) const { return v[static_cast<size_t>(i)]; }

    double* data() { return v.data(); }
    const double* data() const { return v.data(); }

    void fill(double value);
};

int64_t shape_numel(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

/// Round every element to float32 precision unless float64 mode is active.
void quantize(Tensor& t);
double quantize(double x);

bool all_finite(const Tensor& t);

} // namespace refvid
