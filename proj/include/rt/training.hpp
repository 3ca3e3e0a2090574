#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rt/attacks.hpp"
#include "rt/dataset.hpp"
#include "rt/model.hpp"

namespace rt {

struct TrainConfig {
    int epochs = 30;
    int batch = 64;
    double lr = 0.1;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    double lr_decay_factor = 0.1;  // multiplied in every lr_decay_interval epochs
    int lr_decay_interval = 50;
    int validation_cadence = 5;             // validate after every cadence-th epoch
    std::optional<PerturbationSpec> attack;  // absent = standard training
    uint64_t master_seed = 0;

    void validate() const;

    bool operator==(const TrainConfig&) const = default;
};

// lr * factor^(epoch / interval), integer division
double lr_at_epoch(const TrainConfig& cfg, int epoch);

// Fisher-Yates permutation of 0..n-1 drawn from Rng(seed)
std::vector<int> shuffled_indices(int n, uint64_t seed);

struct OptimizerState {
    std::vector<Tensor> velocity;  // aligned with model.params
    int64_t steps = 0;
};

OptimizerState make_optimizer_state(const Model& m);

// v <- momentum*v + (g + weight_decay*theta); theta <- theta - lr*v.
// grads must hold exactly one entry per model parameter.
void sgd_step(Model& m, OptimizerState& st, const std::map<std::string, Tensor>& grads, double lr,
              double momentum, double weight_decay);

struct BatchGrads {
    std::map<std::string, Tensor> grads;  // keyed by parameter name
    double loss = 0;                      // mean cross entropy over the batch
    int correct = 0;                      // argmax hits on the inputs as given
};

// Weight gradients of the mean cross entropy at (X, y).
BatchGrads batch_gradients(const Model& m, const Tensor& X, const std::vector<int>& y);

struct EpochMetrics {
    int epoch = 0;
    std::string split;      // "train" or "val"
    double loss = 0;        // train: optimized loss; val: mean clean loss
    double clean_acc = -1;  // negative when not measured
    double adv_acc = -1;
    double eps = 0;
    double wall_time_s = 0;
};

struct TrainResult {
    Model final_model;
    Model best_model;    // highest validated adversarial accuracy (clean
                         // accuracy when training without an attack); ties
                         // go to the earlier epoch; final model if no
                         // validation ever ran
    int best_epoch = -1;
    std::vector<EpochMetrics> history;  // one train row per epoch + val rows
};

using MetricsHook = std::function<void(const EpochMetrics&)>;

// Adversarially-perturbed minibatch SGD. Epoch e shuffles with
// mix(master_seed, e); the sample at dataset index i is attacked with seed
// mix(mix(master_seed, e), i), keyed by its dataset index, never by its
// position in the batch. Train rows report the optimized loss and the
// accuracy on the inputs the optimizer saw (adversarial when an attack is
// configured, clean otherwise). Pass an empty val set to skip validation.
TrainResult train_adversarial(Model model, const Dataset& train, const Dataset& val,
                              const TrainConfig& cfg, const MetricsHook& hook = nullptr);

// Observes the carried perturbation in free training.
struct FreeTrainObserver {
    virtual ~FreeTrainObserver() = default;
    virtual void on_batch_start(int epoch, int batch, const Tensor& delta) = 0;
    virtual void on_batch_end(int epoch, int batch, const Tensor& delta) = 0;
};

// Free adversarial training: each minibatch is replayed `replay` times; one
// backward pass per replay yields both weight and input gradients, the
// weights step every pass, and the perturbation carries across batches
// (and epochs) instead of restarting. Runs ceil(cfg.epochs / replay)
// epochs over the data. cfg.attack must be present; its step size
// defaults to 1.5*eps (single-step rule). The forward always evaluates at
// the domain-clamped view of the carried delta, and the carried buffer is
// exactly what the last update produced.
TrainResult train_free(Model model, const Dataset& train, const Dataset& val,
                       const TrainConfig& cfg, int replay, const MetricsHook& hook = nullptr,
                       FreeTrainObserver* observer = nullptr);

}  // namespace rt
