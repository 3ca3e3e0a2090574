#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rt/tensor.hpp"

namespace rt {

// In-memory dataset: inputs (n, C, H, W) with pixels in [0,1], one integer
// label per sample.
struct Dataset {
    Tensor inputs;
    std::vector<int> labels;
    int classes = 0;

    int size() const { return inputs.rank() ? inputs.dim(0) : 0; }
    std::vector<int> sample_shape() const;  // per-sample shape
    Tensor sample(int i) const;             // copy of row i
    void validate() const;                  // pixel domain + label range
};

// Procedural grayscale glyphs, one glyph family per class (bar, cross,
// square outline, disc, diagonal, checker, ring, corner block, stripe
// pair, dot grid), drawn at jittered positions with additive Gaussian
// noise, clipped to [0,1]. Classes are balanced: counts differ by at most
// one. Entirely determined by (n, classes, size, noise, seed); sample i is
// drawn from its own stream, so a prefix of a larger dataset is identical
// to a smaller one.
Dataset generate_shapes(int n, int classes, int size, double noise, uint64_t seed);

// Takes `count` samples starting at `from` (bounds checked).
Dataset slice(const Dataset& d, int from, int count);

// New tensor holding rows idx[0], idx[1], ... of a batch-major tensor.
Tensor gather_rows(const Tensor& data, const std::vector<int>& idx);
std::vector<int> gather_labels(const std::vector<int>& labels, const std::vector<int>& idx);

// Single-file container: magic "RDSET1", u16 classes, u32 sample count,
// embedded tensor blob, then one u16 label per sample.
void save_dataset(const Dataset& d, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace rt
