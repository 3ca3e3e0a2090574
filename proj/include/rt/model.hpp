#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rt/autodiff.hpp"
#include "rt/tensor.hpp"

namespace rt {

// Two desk-scale architectures share one config type. "mlp" is a fully
// connected relu net; "rescnn" is a small residual conv net: stem conv,
// then one stage per entry of `widths` (stride-2 downsample conv between
// stages), each stage holding `blocks_per_stage` residual blocks whose
// branch output is multiplied by a learnable per-stage scalar (no batch
// norm anywhere), global average pool, linear head.
struct ModelConfig {
    enum class Kind { mlp, rescnn };

    Kind kind = Kind::mlp;
    std::vector<int> input_shape;  // {D} or {C,H,W}; rescnn requires {C,H,W} with H == W
    std::vector<int> hidden;       // mlp layer widths
    std::vector<int> widths;       // rescnn stage widths
    int blocks_per_stage = 1;
    int classes = 2;

    static ModelConfig mlp_tiny(std::vector<int> input_shape, int classes);
    static ModelConfig rescnn_tiny(std::vector<int> input_shape, int classes);

    int input_dim() const;  // flattened input size
    // width of the penultimate representation: last hidden width for mlp,
    // last stage width for rescnn
    int representation_dim() const;
    void validate() const;

    bool operator==(const ModelConfig&) const = default;
};

struct Model {
    ModelConfig config;
    // creation order; names are unique
    std::vector<std::pair<std::string, Tensor>> params;

    int64_t parameter_count() const;
    bool has_param(const std::string& name) const;
    Tensor& param(const std::string& name);
    const Tensor& param(const std::string& name) const;
    std::vector<std::string> param_names() const;
    std::vector<std::string> sorted_param_names() const;  // canonical order for reductions
};

// Deterministic build: weights and biases drawn uniformly from
// [-1/sqrt(fan_in), 1/sqrt(fan_in)] in creation order from one stream;
// residual scales start at 1.
Model build_model(const ModelConfig& cfg, uint64_t seed);

// A forward graph over one batch. `x` is the input leaf; `features` is the
// penultimate representation, `logits` the head output, `loss` the batch
// cross entropy (only if built with labels).
struct ModelGraph {
    Graph g;
    Val x;
    Val features;
    Val logits;
    Val loss;
    bool promoted = false;  // input arrived without a batch dim
};

ModelGraph build_forward_graph(const Model& m, Tensor X, bool x_grad, bool param_grad);
ModelGraph build_loss_graph(const Model& m, Tensor X, const std::vector<int>& labels, bool x_grad,
                            bool param_grad, Reduction red);

// Plain evaluation; single sample in, single row out.
Tensor logits(const Model& m, const Tensor& X);
Tensor features(const Model& m, const Tensor& X);

}  // namespace rt
