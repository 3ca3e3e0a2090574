#include "rt/tensor.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "tensor io assumes a little-endian host");

namespace rt {

int64_t shape_numel(const std::vector<int>& shape) {
    int64_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw std::invalid_argument("tensor shape has non-positive dim " + shape_str(shape));
        n *= d;
    }
    return n;
}

std::string shape_str(const std::vector<int>& shape) {
    if (shape.empty()) return "scalar";
    std::ostringstream os;
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    return os.str();
}

Tensor Tensor::zeros(std::vector<int> shape) {
    Tensor t;
    int64_t n = shape_numel(shape);
    t.shape = std::move(shape);
    t.data.assign(static_cast<size_t>(n), Scalar(0));
    return t;
}

Tensor Tensor::full(std::vector<int> shape, Scalar v) {
    Tensor t = zeros(std::move(shape));
    for (auto& x : t.data) x = v;
    return t;
}

Tensor Tensor::from(std::vector<int> shape, std::vector<Scalar> values) {
    int64_t n = shape_numel(shape);
    if (n != static_cast<int64_t>(values.size()))
        throw std::invalid_argument("tensor data size " + std::to_string(values.size()) +
                                    " does not match shape " + rt::shape_str(shape));
    Tensor t;
    t.shape = std::move(shape);
    t.data = std::move(values);
    return t;
}

Tensor Tensor::scalar(Scalar v) {
    Tensor t;
    t.shape = {1};
    t.data = {v};
    return t;
}

double Tensor::l2_norm() const {
    double s = 0;
    for (Scalar v : data) s += static_cast<double>(v) * static_cast<double>(v);
    return std::sqrt(s);
}

double Tensor::linf_norm() const {
    double m = 0;
    for (Scalar v : data) m = std::max(m, std::abs(static_cast<double>(v)));
    return m;
}

std::string Tensor::shape_str() const { return rt::shape_str(shape); }

namespace {

constexpr char kMagic[6] = {'R', 'T', 'N', 'S', 'R', '1'};

void read_exact(std::istream& in, void* dst, size_t n, const std::string& context) {
    in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<size_t>(in.gcount()) != n)
        throw std::runtime_error(context + ": truncated tensor data");
}

}  // namespace

void write_tensor(std::ostream& out, const Tensor& t) {
    out.write(kMagic, 6);
    uint8_t dtype = sizeof(Scalar) == 8 ? 1 : 0;
    uint8_t rank = static_cast<uint8_t>(t.rank());
    out.put(static_cast<char>(dtype));
    out.put(static_cast<char>(rank));
    for (int d : t.shape) {
        uint32_t v = static_cast<uint32_t>(d);
        out.write(reinterpret_cast<const char*>(&v), 4);
    }
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(Scalar)));
    if (!out) throw std::runtime_error("tensor write failed");
}

Tensor read_tensor(std::istream& in, const std::string& context) {
    char magic[6];
    read_exact(in, magic, 6, context);
    if (std::memcmp(magic, kMagic, 5) != 0)
        throw std::runtime_error(context + ": not a tensor file (bad magic)");
    if (magic[5] != '1')
        throw std::runtime_error(context + ": unsupported tensor format version '" +
                                 std::string(1, magic[5]) + "'");
    uint8_t dtype = 0, rank = 0;
    read_exact(in, &dtype, 1, context);
    read_exact(in, &rank, 1, context);
    if (dtype > 1)
        throw std::runtime_error(context + ": unknown tensor dtype " + std::to_string(dtype));
    std::vector<int> shape(rank);
    for (int i = 0; i < rank; ++i) {
        uint32_t v = 0;
        read_exact(in, &v, 4, context);
        shape[static_cast<size_t>(i)] = static_cast<int>(v);
    }
    int64_t n = shape_numel(shape);
    Tensor t = Tensor::zeros(shape);
    if (dtype == 0) {
        std::vector<float> buf(static_cast<size_t>(n));
        read_exact(in, buf.data(), buf.size() * 4, context);
        for (int64_t i = 0; i < n; ++i) t[i] = static_cast<Scalar>(buf[static_cast<size_t>(i)]);
    } else {
        std::vector<double> buf(static_cast<size_t>(n));
        read_exact(in, buf.data(), buf.size() * 8, context);
        for (int64_t i = 0; i < n; ++i) t[i] = static_cast<Scalar>(buf[static_cast<size_t>(i)]);
    }
    return t;
}

void write_tensor_file(const Tensor& t, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    write_tensor(out, t);
}

Tensor read_tensor_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    return read_tensor(in, path);
}

}  // namespace rt
