#include "rt/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "rt/common.hpp"

namespace rt {

std::vector<int> Dataset::sample_shape() const {
    if (inputs.rank() < 2) throw std::logic_error("dataset inputs must have a batch dim");
    return {inputs.shape.begin() + 1, inputs.shape.end()};
}

Tensor Dataset::sample(int i) const {
    if (i < 0 || i >= size())
        throw std::out_of_range("dataset sample " + std::to_string(i) + " of " +
                                std::to_string(size()));
    auto shape = sample_shape();
    int64_t stride = shape_numel(shape);
    Tensor t = Tensor::zeros(shape);
    std::copy_n(inputs.ptr() + static_cast<int64_t>(i) * stride, stride, t.ptr());
    return t;
}

void Dataset::validate() const {
    if (classes < 2) throw std::invalid_argument("dataset: classes must be >= 2");
    if (static_cast<int>(labels.size()) != size())
        throw std::invalid_argument("dataset: " + std::to_string(labels.size()) + " labels for " +
                                    std::to_string(size()) + " samples");
    for (size_t i = 0; i < labels.size(); ++i)
        if (labels[i] < 0 || labels[i] >= classes)
            throw std::invalid_argument("dataset: label " + std::to_string(labels[i]) +
                                        " out of range at sample " + std::to_string(i));
    for (int64_t i = 0; i < inputs.numel(); ++i)
        if (!(inputs[i] >= Scalar(0) && inputs[i] <= Scalar(1)))
            throw std::invalid_argument("dataset: pixel outside [0,1] at flat index " +
                                        std::to_string(i));
}

namespace {

struct Canvas {
    int s;
    Scalar* px;

    void set(int y, int x, Scalar v = 1) {
        if (y >= 0 && y < s && x >= 0 && x < s) px[y * s + x] = v;
    }
    void hline(int y, int x0, int x1) {
        for (int x = x0; x <= x1; ++x) set(y, x);
    }
    void vline(int x, int y0, int y1) {
        for (int y = y0; y <= y1; ++y) set(y, x);
    }
};

// class k glyph at jitter (dy, dx); geometry scales with s
void draw_glyph(Canvas& c, int k, int dy, int dx, Rng& rng) {
    int s = c.s;
    int mid = s / 2;
    int cy = mid + dy, cx = mid + dx;
    int r = s / 3;
    switch (k) {
        case 0:  // horizontal bar
            c.hline(cy, cx - r, cx + r);
            c.hline(cy + 1, cx - r, cx + r);
            break;
        case 1:  // cross
            c.hline(cy, cx - r, cx + r);
            c.vline(cx, cy - r, cy + r);
            break;
        case 2:  // square outline
            c.hline(cy - r + 1, cx - r + 1, cx + r - 1);
            c.hline(cy + r - 1, cx - r + 1, cx + r - 1);
            c.vline(cx - r + 1, cy - r + 1, cy + r - 1);
            c.vline(cx + r - 1, cy - r + 1, cy + r - 1);
            break;
        case 3:  // disc
            for (int y = -r; y <= r; ++y)
                for (int x = -r; x <= r; ++x)
                    if (y * y + x * x <= (r - 1) * (r - 1) + 1) c.set(cy + y, cx + x);
            break;
        case 4: {  // diagonal, either orientation
            bool flip = rng.uniform01() < 0.5;
            for (int t = -r; t <= r; ++t) {
                int x = flip ? -t : t;
                c.set(cy + t, cx + x);
                c.set(cy + t, cx + x + 1);
            }
            break;
        }
        case 5: {  // checkerboard of 2x2 blocks, jittered phase
            int phase = (dy + dx) & 1;
            for (int y = 0; y < s; ++y)
                for (int x = 0; x < s; ++x)
                    if ((((y / 2) + (x / 2)) & 1) == phase) c.set(y, x, Scalar(0.7));
            break;
        }
        case 6:  // ring
            for (int y = -r; y <= r; ++y)
                for (int x = -r; x <= r; ++x) {
                    int d2 = y * y + x * x;
                    if (d2 <= r * r && d2 >= (r - 2) * (r - 2)) c.set(cy + y, cx + x);
                }
            break;
        case 7: {  // filled block in one corner
            int q = rng.uniform_int(4);
            int half = s / 2 - 1;
            int y0 = (q & 1) ? s - half : 0;
            int x0 = (q & 2) ? s - half : 0;
            for (int y = 0; y < half; ++y)
                for (int x = 0; x < half; ++x) c.set(y0 + y, x0 + x);
            break;
        }
        case 8:  // two vertical bars
            c.vline(cx - r / 2 - 1, cy - r, cy + r);
            c.vline(cx + r / 2 + 1, cy - r, cy + r);
            break;
        case 9: {  // dot grid, jittered phase
            int py = ((dy % 3) + 3) % 3, pxh = ((dx % 3) + 3) % 3;
            for (int y = py; y < s; y += 3)
                for (int x = pxh; x < s; x += 3) c.set(y, x);
            break;
        }
        default:
            throw std::logic_error("glyph class out of range");
    }
}

}  // namespace

Dataset generate_shapes(int n, int classes, int size, double noise, uint64_t seed) {
    if (n < 1) throw std::invalid_argument("generate_shapes: n must be >= 1");
    if (classes < 2 || classes > 10)
        throw std::invalid_argument("generate_shapes: classes must be in [2,10], got " +
                                    std::to_string(classes));
    if (size < 8) throw std::invalid_argument("generate_shapes: size must be >= 8, got " +
                                              std::to_string(size));
    if (noise < 0) throw std::invalid_argument("generate_shapes: negative noise");
    Dataset d;
    d.classes = classes;
    d.inputs = Tensor::zeros({n, 1, size, size});
    d.labels.resize(static_cast<size_t>(n));
    int jitter = std::max(1, size / 6);
    for (int i = 0; i < n; ++i) {
        int k = i % classes;
        d.labels[static_cast<size_t>(i)] = k;
        Rng rng(mix(seed, 0xda7aULL, static_cast<uint64_t>(i)));
        Canvas c{size, d.inputs.ptr() + static_cast<int64_t>(i) * size * size};
        int dy = rng.uniform_int(2 * jitter + 1) - jitter;
        int dx = rng.uniform_int(2 * jitter + 1) - jitter;
        draw_glyph(c, k, dy, dx, rng);
        if (noise > 0) {
            for (int64_t p = 0; p < static_cast<int64_t>(size) * size; ++p) {
                double v = static_cast<double>(c.px[p]) + noise * rng.normal();
                c.px[p] = static_cast<Scalar>(std::clamp(v, 0.0, 1.0));
            }
        }
    }
    return d;
}

Dataset slice(const Dataset& d, int from, int count) {
    if (from < 0 || count < 0 || from + count > d.size())
        throw std::out_of_range("dataset slice [" + std::to_string(from) + "," +
                                std::to_string(from + count) + ") of " + std::to_string(d.size()));
    Dataset out;
    out.classes = d.classes;
    auto shape = d.sample_shape();
    int64_t stride = shape_numel(shape);
    shape.insert(shape.begin(), count);
    out.inputs = Tensor::zeros(shape);
    std::copy_n(d.inputs.ptr() + from * stride, count * stride, out.inputs.ptr());
    out.labels.assign(d.labels.begin() + from, d.labels.begin() + from + count);
    return out;
}

Tensor gather_rows(const Tensor& data, const std::vector<int>& idx) {
    if (data.rank() < 2) throw std::invalid_argument("gather_rows: tensor needs a batch dim");
    int n = data.dim(0);
    std::vector<int> shape = data.shape;
    shape[0] = static_cast<int>(idx.size());
    Tensor out = Tensor::zeros(shape);
    int64_t stride = data.numel() / n;
    for (size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] < 0 || idx[i] >= n)
            throw std::out_of_range("gather_rows: index " + std::to_string(idx[i]) + " of " +
                                    std::to_string(n));
        std::copy_n(data.ptr() + static_cast<int64_t>(idx[i]) * stride, stride,
                    out.ptr() + static_cast<int64_t>(i) * stride);
    }
    return out;
}

std::vector<int> gather_labels(const std::vector<int>& labels, const std::vector<int>& idx) {
    std::vector<int> out(idx.size());
    for (size_t i = 0; i < idx.size(); ++i) out[i] = labels.at(static_cast<size_t>(idx[i]));
    return out;
}

namespace {
constexpr char kDsMagic[6] = {'R', 'D', 'S', 'E', 'T', '1'};
}

void save_dataset(const Dataset& d, const std::string& path) {
    d.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out.write(kDsMagic, 6);
    uint16_t classes = static_cast<uint16_t>(d.classes);
    uint32_t n = static_cast<uint32_t>(d.size());
    out.write(reinterpret_cast<const char*>(&classes), 2);
    out.write(reinterpret_cast<const char*>(&n), 4);
    write_tensor(out, d.inputs);
    for (int label : d.labels) {
        uint16_t v = static_cast<uint16_t>(label);
        out.write(reinterpret_cast<const char*>(&v), 2);
    }
    if (!out) throw std::runtime_error("dataset write failed: " + path);
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    char magic[6];
    in.read(magic, 6);
    if (in.gcount() != 6 || std::memcmp(magic, kDsMagic, 6) != 0)
        throw std::runtime_error(path + ": not a dataset file (bad magic)");
    uint16_t classes = 0;
    uint32_t n = 0;
    in.read(reinterpret_cast<char*>(&classes), 2);
    in.read(reinterpret_cast<char*>(&n), 4);
    if (!in) throw std::runtime_error(path + ": truncated dataset header");
    Dataset d;
    d.classes = classes;
    d.inputs = read_tensor(in, path);
    d.labels.resize(n);
    for (uint32_t i = 0; i < n; ++i) {
        uint16_t v = 0;
        in.read(reinterpret_cast<char*>(&v), 2);
        if (!in) throw std::runtime_error(path + ": truncated labels");
        d.labels[i] = v;
    }
    d.validate();
    return d;
}

}  // namespace rt
