#include "rt/timing.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <string>

#include "rt/attacks.hpp"
#include "rt/common.hpp"
#include "rt/training.hpp"

namespace rt {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// median of 3 contiguous bucket means, robust to one slow outlier rep
double median_of_means(const std::vector<double>& xs) {
    size_t n = xs.size();
    if (n < 3) {
        double s = 0;
        for (double x : xs) s += x;
        return s / static_cast<double>(n);
    }
    double means[3];
    for (size_t b = 0; b < 3; ++b) {
        size_t lo = b * n / 3, hi = (b + 1) * n / 3;
        double s = 0;
        for (size_t i = lo; i < hi; ++i) s += xs[i];
        means[b] = s / static_cast<double>(hi - lo);
    }
    std::sort(means, means + 3);
    return means[1];
}

}  // namespace

BatchTiming measure_batch_time(const Model& m, int batch, int attack_steps, int reps,
                               uint64_t seed) {
    if (batch < 1) throw std::invalid_argument("measure_batch_time: batch must be >= 1");
    if (attack_steps < 0) throw std::invalid_argument("measure_batch_time: negative attack steps");
    if (reps < 3) throw std::invalid_argument("measure_batch_time: reps must be >= 3");

    Rng rng(mix(seed, 0x7431ULL));
    std::vector<int> xshape;
    xshape.push_back(batch);
    for (int d : m.config.input_shape) xshape.push_back(d);
    Tensor X = Tensor::zeros(xshape);
    for (auto& v : X.data) v = static_cast<Scalar>(rng.uniform01());
    std::vector<int> y(static_cast<size_t>(batch));
    for (auto& l : y) l = rng.uniform_int(m.config.classes);

    PerturbationSpec spec;
    spec.norm = Norm::l2;
    spec.eps = 1.0;
    spec.steps = attack_steps;
    spec.rand_init = true;
    spec.rng_seed = mix(seed, 1);
    std::vector<uint64_t> seeds(static_cast<size_t>(batch));
    for (int i = 0; i < batch; ++i) seeds[static_cast<size_t>(i)] = mix(seed, 2, static_cast<uint64_t>(i));

    Model scratch = m;
    OptimizerState opt = make_optimizer_state(scratch);
    auto run_once = [&]() {
        Tensor Xin = attack_steps > 0 ? perturb_batch(scratch, X, y, spec, seeds) : X;
        BatchGrads bg = batch_gradients(scratch, Xin, y);
        sgd_step(scratch, opt, bg.grads, 0.1, 0.9, 5e-4);
    };

    run_once();  // warmup, discarded
    std::vector<double> times;
    times.reserve(static_cast<size_t>(reps));
    for (int r = 0; r < reps; ++r) {
        auto t0 = std::chrono::steady_clock::now();
        run_once();
        times.push_back(seconds_since(t0));
    }

    BatchTiming bt;
    bt.steps = attack_steps;
    bt.batch = batch;
    bt.workers = 1;
    bt.reps = reps;
    bt.mean_s = median_of_means(times);
    double mu = 0;
    for (double t : times) mu += t;
    mu /= static_cast<double>(reps);
    double s2 = 0;
    for (double t : times) s2 += (t - mu) * (t - mu);
    bt.std_s = reps > 1 ? std::sqrt(s2 / static_cast<double>(reps - 1)) : 0.0;
    return bt;
}

namespace {

// per-batch seconds at the given per-worker batch size, linearly interpolated
// between the two nearest measured sizes at the same step count
double batch_seconds(const std::vector<BatchTiming>& grid, int steps, int pw_batch) {
    const BatchTiming* lo = nullptr;
    const BatchTiming* hi = nullptr;
    for (const auto& t : grid) {
        if (t.steps != steps) continue;
        if (t.batch == pw_batch) return t.mean_s;
        if (t.batch < pw_batch && (!lo || t.batch > lo->batch)) lo = &t;
        if (t.batch > pw_batch && (!hi || t.batch < hi->batch)) hi = &t;
    }
    if (lo && hi) {
        double f = double(pw_batch - lo->batch) / double(hi->batch - lo->batch);
        return lo->mean_s + f * (hi->mean_s - lo->mean_s);
    }
    throw std::invalid_argument(
        "estimate_total_time: no timing coverage for batch " + std::to_string(pw_batch) + " at " +
        std::to_string(steps) + " attack steps (measured sizes " +
        (lo ? "reach only " + std::to_string(lo->batch) + " from below"
            : hi ? "start only at " + std::to_string(hi->batch) : "are absent for this step count") +
        ")");
}

}  // namespace

TimeEstimate estimate_total_time(const std::vector<BatchTiming>& grid, int epochs,
                                 int validation_cadence, int64_t n_train, int64_t n_val, int batch,
                                 int workers, int train_attack_steps, int eval_attack_steps) {
    if (epochs < 1) throw std::invalid_argument("estimate_total_time: epochs must be >= 1");
    if (validation_cadence < 1)
        throw std::invalid_argument("estimate_total_time: validation cadence must be >= 1");
    if (n_train < 1) throw std::invalid_argument("estimate_total_time: n_train must be >= 1");
    if (n_val < 0) throw std::invalid_argument("estimate_total_time: negative n_val");
    if (batch < 1) throw std::invalid_argument("estimate_total_time: batch must be >= 1");
    if (workers < 1) throw std::invalid_argument("estimate_total_time: workers must be >= 1");
    if (train_attack_steps < 0 || eval_attack_steps < 0)
        throw std::invalid_argument("estimate_total_time: negative attack steps");
    for (size_t i = 0; i < grid.size(); ++i)
        for (size_t j = i + 1; j < grid.size(); ++j)
            if (grid[i].steps == grid[j].steps && grid[i].batch == grid[j].batch)
                throw std::invalid_argument("estimate_total_time: duplicate timing for batch " +
                                            std::to_string(grid[i].batch) + " at " +
                                            std::to_string(grid[i].steps) + " attack steps");

    int pw = (batch + workers - 1) / workers;
    TimeEstimate e;
    e.train_batches_per_epoch = static_cast<int>((n_train + batch - 1) / batch);
    e.val_batches = n_val > 0 ? static_cast<int>((n_val + batch - 1) / batch) : 0;
    e.validation_epochs = n_val > 0 ? epochs / validation_cadence : 0;
    e.train_s = double(epochs) * e.train_batches_per_epoch * batch_seconds(grid, train_attack_steps, pw);
    e.val_s = e.validation_epochs > 0
                  ? double(e.validation_epochs) * e.val_batches *
                        batch_seconds(grid, eval_attack_steps, pw)
                  : 0.0;
    e.total_s = e.train_s + e.val_s;
    return e;
}

}  // namespace rt
