#include "rt/evaluation.hpp"

#include <fstream>
#include <stdexcept>

namespace rt {

EvalResult evaluate(const Model& m, const Dataset& d, const PerturbationSpec* spec, int chunk) {
    if (chunk < 1) throw std::invalid_argument("evaluate: chunk must be >= 1");
    if (d.classes != m.config.classes)
        throw std::invalid_argument("evaluate: dataset has " + std::to_string(d.classes) +
                                    " classes, model expects " +
                                    std::to_string(m.config.classes));
    int n = d.size();
    if (n == 0) throw std::invalid_argument("evaluate: empty dataset");

    EvalResult res;
    res.n = n;
    std::vector<int> correct_idx;
    double loss_sum = 0;
    for (int at = 0; at < n; at += chunk) {
        int c = std::min(chunk, n - at);
        std::vector<int> idx(static_cast<size_t>(c));
        for (int i = 0; i < c; ++i) idx[static_cast<size_t>(i)] = at + i;
        Tensor X = gather_rows(d.inputs, idx);
        std::vector<int> y(d.labels.begin() + at, d.labels.begin() + at + c);
        ModelGraph mg = build_forward_graph(m, std::move(X), false, false);
        const Tensor& lg = mg.g.value(mg.logits);
        auto preds = argmax_rows(lg);
        auto losses = cross_entropy_rows(lg, y);
        for (int i = 0; i < c; ++i) {
            loss_sum += losses[static_cast<size_t>(i)];
            if (preds[static_cast<size_t>(i)] == y[static_cast<size_t>(i)])
                correct_idx.push_back(at + i);
        }
    }
    res.clean_acc = static_cast<double>(correct_idx.size()) / n;
    res.mean_clean_loss = loss_sum / n;

    if (spec) {
        spec->validate();
        // only clean-correct samples are attacked; the rest already count
        // as adversarially wrong
        int still_correct = 0;
        for (size_t at = 0; at < correct_idx.size(); at += static_cast<size_t>(chunk)) {
            size_t c = std::min(static_cast<size_t>(chunk), correct_idx.size() - at);
            std::vector<int> idx(correct_idx.begin() + static_cast<long>(at),
                                 correct_idx.begin() + static_cast<long>(at + c));
            Tensor X = gather_rows(d.inputs, idx);
            std::vector<int> y(c);
            std::vector<uint64_t> seeds(c);
            for (size_t i = 0; i < c; ++i) {
                y[i] = d.labels[static_cast<size_t>(idx[i])];
                seeds[i] = mix(spec->rng_seed, static_cast<uint64_t>(idx[i]));
            }
            auto results = attack_batch(m, X, y, *spec, seeds);
            for (const auto& r : results)
                if (!r.success) ++still_correct;
        }
        res.adv_acc = static_cast<double>(still_correct) / n;
    }
    return res;
}

double adversarial_accuracy(const Model& m, const Dataset& d, const PerturbationSpec& spec) {
    return evaluate(m, d, &spec).adv_acc;
}

std::vector<SweepPoint> eps_sweep(const Model& m, const Dataset& d, const PerturbationSpec& base,
                                  const std::vector<double>& eps_values) {
    if (eps_values.empty()) throw std::invalid_argument("eps_sweep: no eps values");
    for (double e : eps_values)
        if (e < 0) throw std::invalid_argument("eps_sweep: negative eps");
    std::vector<SweepPoint> curve;
    curve.reserve(eps_values.size());
    for (size_t i = 0; i < eps_values.size(); ++i) {
        PerturbationSpec spec = base;
        spec.eps = eps_values[i];
        spec.step_size = spec.steps > 0 ? 2.5 * spec.eps / spec.steps : 0.0;
        spec.rng_seed = mix(base.rng_seed, static_cast<uint64_t>(i));
        EvalResult ev = evaluate(m, d, &spec);
        SweepPoint p;
        p.eps = spec.eps;
        p.adv_acc = ev.adv_acc;
        p.clean_acc = ev.clean_acc;
        p.steps = spec.steps;
        p.restarts = spec.restarts;
        p.seed = spec.rng_seed;
        curve.push_back(p);
    }
    return curve;
}

void write_curve_csv(const std::vector<SweepPoint>& curve, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << "eps,adv_acc,clean_acc,steps,restarts,seed\n";
    for (const auto& p : curve)
        out << p.eps << ',' << p.adv_acc << ',' << p.clean_acc << ',' << p.steps << ','
            << p.restarts << ',' << p.seed << '\n';
    if (!out) throw std::runtime_error("curve write failed: " + path);
}

}  // namespace rt
