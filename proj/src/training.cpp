#include "rt/training.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "rt/evaluation.hpp"

namespace rt {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

void TrainConfig::validate() const {
    if (epochs < 0) throw std::invalid_argument("train config: negative epochs");
    if (batch < 1) throw std::invalid_argument("train config: batch must be >= 1");
    if (!(lr > 0)) throw std::invalid_argument("train config: lr must be > 0");
    if (momentum < 0 || momentum >= 1)
        throw std::invalid_argument("train config: momentum must be in [0,1)");
    if (weight_decay < 0) throw std::invalid_argument("train config: negative weight decay");
    if (!(lr_decay_factor > 0) || lr_decay_factor > 1)
        throw std::invalid_argument("train config: lr decay factor must be in (0,1]");
    if (lr_decay_interval < 1)
        throw std::invalid_argument("train config: lr decay interval must be >= 1");
    if (validation_cadence < 1)
        throw std::invalid_argument("train config: validation cadence must be >= 1");
    if (attack) attack->validate();
}

double lr_at_epoch(const TrainConfig& cfg, int epoch) {
    if (epoch < 0) throw std::invalid_argument("lr_at_epoch: negative epoch");
    return cfg.lr * std::pow(cfg.lr_decay_factor, epoch / cfg.lr_decay_interval);
}

std::vector<int> shuffled_indices(int n, uint64_t seed) {
    std::vector<int> idx(static_cast<size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    for (int i = n - 1; i > 0; --i) {
        int j = rng.uniform_int(i + 1);
        std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
    }
    return idx;
}

OptimizerState make_optimizer_state(const Model& m) {
    OptimizerState st;
    st.velocity.reserve(m.params.size());
    for (const auto& [name, t] : m.params) st.velocity.push_back(Tensor::zeros(t.shape));
    return st;
}

void sgd_step(Model& m, OptimizerState& st, const std::map<std::string, Tensor>& grads, double lr,
              double momentum, double weight_decay) {
    if (st.velocity.size() != m.params.size())
        throw std::invalid_argument("sgd_step: optimizer state does not match model");
    for (const auto& [name, g] : grads)
        if (!m.has_param(name))
            throw std::invalid_argument("sgd_step: gradient for unknown parameter '" + name + "'");
    Scalar lrs = static_cast<Scalar>(lr);
    Scalar mom = static_cast<Scalar>(momentum);
    Scalar wd = static_cast<Scalar>(weight_decay);
    for (size_t p = 0; p < m.params.size(); ++p) {
        auto& [name, theta] = m.params[p];
        auto it = grads.find(name);
        if (it == grads.end())
            throw std::invalid_argument("sgd_step: missing gradient for '" + name + "'");
        const Tensor& g = it->second;
        if (!g.same_shape(theta))
            throw std::invalid_argument("sgd_step: gradient shape " + g.shape_str() +
                                        " does not match '" + name + "' " + theta.shape_str());
        Tensor& v = st.velocity[p];
        for (int64_t i = 0; i < theta.numel(); ++i) {
            v[i] = mom * v[i] + (g[i] + wd * theta[i]);
            theta[i] -= lrs * v[i];
        }
    }
    ++st.steps;
}

BatchGrads batch_gradients(const Model& m, const Tensor& X, const std::vector<int>& y) {
    ModelGraph mg = build_loss_graph(m, X, y, false, true, Reduction::mean);
    mg.g.backward(mg.loss);
    BatchGrads out;
    out.grads = mg.g.gradients(m.param_names());
    out.loss = static_cast<double>(mg.g.value(mg.loss)[0]);
    auto preds = argmax_rows(mg.g.value(mg.logits));
    for (size_t i = 0; i < y.size(); ++i)
        if (preds[i] == y[i]) ++out.correct;
    return out;
}

namespace {

void check_train_inputs(const Model& m, const Dataset& train, const Dataset& val) {
    if (train.size() < 1) throw std::invalid_argument("train: empty training set");
    if (train.classes != m.config.classes)
        throw std::invalid_argument("train: dataset has " + std::to_string(train.classes) +
                                    " classes, model expects " +
                                    std::to_string(m.config.classes));
    if (val.size() > 0 && val.classes != m.config.classes)
        throw std::invalid_argument("train: validation class count mismatch");
}

struct BestTracker {
    double score = -1;
    int epoch = -1;

    // strict improvement only, so ties keep the earlier epoch
    bool offer(double s) {
        if (s > score) {
            score = s;
            return true;
        }
        return false;
    }
};

EpochMetrics run_validation(const Model& model, const Dataset& val, const TrainConfig& cfg,
                            int epoch) {
    auto t0 = Clock::now();
    const PerturbationSpec* spec = cfg.attack ? &*cfg.attack : nullptr;
    EvalResult ev = evaluate(model, val, spec);
    EpochMetrics vm;
    vm.epoch = epoch;
    vm.split = "val";
    vm.loss = ev.mean_clean_loss;
    vm.clean_acc = ev.clean_acc;
    vm.adv_acc = ev.adv_acc;
    vm.eps = cfg.attack ? cfg.attack->eps : 0;
    vm.wall_time_s = seconds_since(t0);
    return vm;
}

}  // namespace

TrainResult train_adversarial(Model model, const Dataset& train, const Dataset& val,
                              const TrainConfig& cfg, const MetricsHook& hook) {
    cfg.validate();
    check_train_inputs(model, train, val);
    int n = train.size();
    OptimizerState st = make_optimizer_state(model);
    TrainResult res;
    BestTracker best;

    for (int e = 0; e < cfg.epochs; ++e) {
        auto t0 = Clock::now();
        uint64_t epoch_seed = mix(cfg.master_seed, static_cast<uint64_t>(e));
        std::vector<int> perm = shuffled_indices(n, epoch_seed);
        double lr = lr_at_epoch(cfg, e);
        double loss_sum = 0;
        int correct = 0;
        for (int start = 0; start < n; start += cfg.batch) {
            int c = std::min(cfg.batch, n - start);
            std::vector<int> idx(perm.begin() + start, perm.begin() + start + c);
            Tensor X = gather_rows(train.inputs, idx);
            std::vector<int> y = gather_labels(train.labels, idx);
            if (cfg.attack) {
                std::vector<uint64_t> seeds(idx.size());
                for (size_t i = 0; i < idx.size(); ++i)
                    seeds[i] = mix(epoch_seed, static_cast<uint64_t>(idx[i]));
                X = perturb_batch(model, X, y, *cfg.attack, seeds);
            }
            BatchGrads bg = batch_gradients(model, X, y);
            sgd_step(model, st, bg.grads, lr, cfg.momentum, cfg.weight_decay);
            loss_sum += bg.loss * c;
            correct += bg.correct;
        }

        EpochMetrics tm;
        tm.epoch = e;
        tm.split = "train";
        tm.loss = loss_sum / n;
        if (cfg.attack) {
            tm.adv_acc = static_cast<double>(correct) / n;
            tm.eps = cfg.attack->eps;
        } else {
            tm.clean_acc = static_cast<double>(correct) / n;
        }
        tm.wall_time_s = seconds_since(t0);
        res.history.push_back(tm);
        if (hook) hook(tm);

        if (val.size() > 0 && (e + 1) % cfg.validation_cadence == 0) {
            EpochMetrics vm = run_validation(model, val, cfg, e);
            res.history.push_back(vm);
            if (hook) hook(vm);
            if (best.offer(cfg.attack ? vm.adv_acc : vm.clean_acc)) {
                res.best_model = model;
                res.best_epoch = e;
            }
        }
    }

    res.final_model = std::move(model);
    if (res.best_epoch < 0) res.best_model = res.final_model;
    return res;
}

TrainResult train_free(Model model, const Dataset& train, const Dataset& val,
                       const TrainConfig& cfg, int replay, const MetricsHook& hook,
                       FreeTrainObserver* observer) {
    cfg.validate();
    check_train_inputs(model, train, val);
    if (!cfg.attack) throw std::invalid_argument("free training requires an attack spec");
    if (replay < 1) throw std::invalid_argument("free training: replay must be >= 1");
    const PerturbationSpec& spec = *cfg.attack;
    double alpha = spec.step_size > 0 ? spec.step_size : 1.5 * spec.eps;

    int n = train.size();
    int epochs = (cfg.epochs + replay - 1) / replay;
    auto sample_shape = train.sample_shape();
    int64_t S = shape_numel(sample_shape);

    // the carried perturbation, one row per batch slot
    std::vector<int> dshape = sample_shape;
    dshape.insert(dshape.begin(), cfg.batch);
    Tensor D = Tensor::zeros(dshape);

    OptimizerState st = make_optimizer_state(model);
    TrainResult res;
    BestTracker best;

    auto delta_view = [&](int rows) {
        std::vector<int> shape = sample_shape;
        shape.insert(shape.begin(), rows);
        Tensor out = Tensor::zeros(shape);
        std::copy_n(D.ptr(), static_cast<int64_t>(rows) * S, out.ptr());
        return out;
    };

    for (int e = 0; e < epochs; ++e) {
        auto t0 = Clock::now();
        uint64_t epoch_seed = mix(cfg.master_seed, static_cast<uint64_t>(e));
        std::vector<int> perm = shuffled_indices(n, epoch_seed);
        double lr = lr_at_epoch(cfg, e);
        double loss_sum = 0;
        int correct = 0;
        int bi = 0;
        for (int start = 0; start < n; start += cfg.batch, ++bi) {
            int c = std::min(cfg.batch, n - start);
            std::vector<int> idx(perm.begin() + start, perm.begin() + start + c);
            Tensor X = gather_rows(train.inputs, idx);
            std::vector<int> y = gather_labels(train.labels, idx);
            if (observer) observer->on_batch_start(e, bi, delta_view(c));

            for (int t = 0; t < replay; ++t) {
                // forward at the domain-clamped view of the carried delta;
                // the buffer itself stays whatever the last update wrote
                Tensor Xeff = X;
                for (int i = 0; i < c; ++i) {
                    const Scalar* xr = X.ptr() + static_cast<int64_t>(i) * S;
                    Scalar* er = Xeff.ptr() + static_cast<int64_t>(i) * S;
                    const Scalar* dr = D.ptr() + static_cast<int64_t>(i) * S;
                    for (int64_t j = 0; j < S; ++j) {
                        Scalar d = dr[j];
                        Scalar lo = -xr[j], hi = Scalar(1) - xr[j];
                        d = std::min(std::max(d, lo), hi);
                        er[j] = xr[j] + d;
                        if (er[j] > Scalar(1)) er[j] = Scalar(1);
                        if (er[j] < Scalar(0)) er[j] = Scalar(0);
                    }
                }
                ModelGraph mg = build_loss_graph(model, Xeff, y, true, true, Reduction::mean);
                mg.g.backward(mg.loss);

                loss_sum += static_cast<double>(mg.g.value(mg.loss)[0]) * c;
                auto preds = argmax_rows(mg.g.value(mg.logits));
                for (int i = 0; i < c; ++i)
                    if (preds[static_cast<size_t>(i)] == y[static_cast<size_t>(i)]) ++correct;

                // delta ascends from its carried value, then projects and
                // clamps against this batch's pixels
                const Tensor& G = mg.g.gradient("x");
                for (int i = 0; i < c; ++i) {
                    const Scalar* g = G.ptr() + static_cast<int64_t>(i) * S;
                    Scalar* d = D.ptr() + static_cast<int64_t>(i) * S;
                    if (spec.norm == Norm::linf) {
                        for (int64_t j = 0; j < S; ++j) {
                            if (g[j] > 0)
                                d[j] += static_cast<Scalar>(alpha);
                            else if (g[j] < 0)
                                d[j] -= static_cast<Scalar>(alpha);
                        }
                    } else {
                        double nrm = 0;
                        for (int64_t j = 0; j < S; ++j) nrm += static_cast<double>(g[j]) * g[j];
                        nrm = std::sqrt(nrm);
                        if (nrm > 0) {
                            double f = alpha / nrm;
                            for (int64_t j = 0; j < S; ++j)
                                d[j] += static_cast<Scalar>(f * static_cast<double>(g[j]));
                        }
                    }
                    Tensor drow = Tensor::zeros(sample_shape);
                    std::copy_n(d, S, drow.ptr());
                    drow = project(std::move(drow), spec.norm, spec.eps);
                    Tensor xrow = Tensor::zeros(sample_shape);
                    std::copy_n(X.ptr() + static_cast<int64_t>(i) * S, S, xrow.ptr());
                    drow = clamp_to_domain(std::move(drow), xrow);
                    std::copy_n(drow.ptr(), S, d);
                }

                sgd_step(model, st, mg.g.gradients(model.param_names()), lr, cfg.momentum,
                         cfg.weight_decay);
            }
            if (observer) observer->on_batch_end(e, bi, delta_view(c));
        }

        EpochMetrics tm;
        tm.epoch = e;
        tm.split = "train";
        tm.loss = loss_sum / (static_cast<double>(n) * replay);
        tm.adv_acc = static_cast<double>(correct) / (static_cast<double>(n) * replay);
        tm.eps = spec.eps;
        tm.wall_time_s = seconds_since(t0);
        res.history.push_back(tm);
        if (hook) hook(tm);

        if (val.size() > 0 && (e + 1) % cfg.validation_cadence == 0) {
            EpochMetrics vm = run_validation(model, val, cfg, e);
            res.history.push_back(vm);
            if (hook) hook(vm);
            if (best.offer(vm.adv_acc)) {
                res.best_model = model;
                res.best_epoch = e;
            }
        }
    }

    res.final_model = std::move(model);
    if (res.best_epoch < 0) res.best_model = res.final_model;
    return res;
}

}  // namespace rt
