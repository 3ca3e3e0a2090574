#pragma once

#include <cstdint>
#include <vector>

#include "rt/model.hpp"

namespace rt {

// one measured configuration: a training batch that runs `steps` attack passes
// before its weight update (steps = 0 is a standard, attack-free batch).
// a batch with K attack steps costs K+1 forward+backward passes in total.
struct BatchTiming {
    int steps = 0;
    int batch = 0;
    int workers = 1;
    double mean_s = 0;  // seconds per batch, median of rep-bucket means
    double std_s = 0;   // sample stddev across reps
    int reps = 0;
};

// times one adversarial training batch (attack_steps l2 attack passes plus the
// weight-gradient pass and SGD update) on synthetic uniform data. runs one
// discarded warmup rep; mean_s is the median of three bucket means so a single
// scheduler stall cannot skew the estimate.
BatchTiming measure_batch_time(const Model& m, int batch, int attack_steps, int reps,
                               uint64_t seed);

// predicted wall time for a full training run assembled from measured batches
struct TimeEstimate {
    double total_s = 0;
    double train_s = 0;
    double val_s = 0;
    int validation_epochs = 0;
    int train_batches_per_epoch = 0;
    int val_batches = 0;  // per validation epoch
};

// estimates total training time from a grid of measured batch timings.
// per-worker batch is ceil(batch / workers); the estimate interpolates
// linearly between the two nearest measured batch sizes at the same step
// count and refuses to extrapolate outside the measured range. workers > 1
// gives a communication-free lower bound.
TimeEstimate estimate_total_time(const std::vector<BatchTiming>& grid, int epochs,
                                 int validation_cadence, int64_t n_train, int64_t n_val,
                                 int batch, int workers, int train_attack_steps,
                                 int eval_attack_steps);

}  // namespace rt
