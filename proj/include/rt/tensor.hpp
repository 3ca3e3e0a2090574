#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "rt/common.hpp"

namespace rt {

// Dense row-major tensor. Shapes are small (rank <= 4 in practice) and all
// dims are positive. Tensors are value types; ops never alias.
struct Tensor {
    std::vector<int> shape;
    std::vector<Scalar> data;

    Tensor() = default;

    static Tensor zeros(std::vector<int> shape);
    static Tensor full(std::vector<int> shape, Scalar v);
    static Tensor from(std::vector<int> shape, std::vector<Scalar> values);
    static Tensor scalar(Scalar v);

    int rank() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<size_t>(i)]; }
    int64_t numel() const { return static_cast<int64_t>(data.size()); }

    Scalar& operator[](int64_t i) { return data[static_cast<size_t>(i)]; }
    Scalar operator[](int64_t i) const { return data[static_cast<size_t>(i)]; }

    Scalar* ptr() { return data.data(); }
    const Scalar* ptr() const { return data.data(); }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    double l2_norm() const;
    double linf_norm() const;

    std::string shape_str() const;  // "8x4x3x3"
};

int64_t shape_numel(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

// Binary tensor file format, magic "RTNSR1":
//   6 bytes magic, 1 byte dtype (0 = f32, 1 = f64), 1 byte rank,
//   rank * u32 dims (little endian), then row-major payload (little endian).
// Readers accept either dtype and convert to the build's Scalar. Distinct
// errors for wrong magic, unsupported version and truncation.
void write_tensor(std::ostream& out, const Tensor& t);
Tensor read_tensor(std::istream& in, const std::string& context);
void write_tensor_file(const Tensor& t, const std::string& path);
Tensor read_tensor_file(const std::string& path);

}  // namespace rt
