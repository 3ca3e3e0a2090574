#include "rt/attacks.hpp"

#include <cmath>
#include <stdexcept>

namespace rt {

std::string norm_name(Norm n) { return n == Norm::l2 ? "l2" : "linf"; }

Norm parse_norm(const std::string& s) {
    if (s == "l2") return Norm::l2;
    if (s == "linf") return Norm::linf;
    throw std::invalid_argument("unknown norm '" + s + "' (expected l2 or linf)");
}

double PerturbationSpec::resolved_step() const {
    if (step_size > 0) return step_size;
    return steps <= 1 ? 1.5 * eps : 2.5 * eps / steps;
}

void PerturbationSpec::validate() const {
    if (eps < 0) throw std::invalid_argument("attack spec: eps must be >= 0");
    if (steps < 0) throw std::invalid_argument("attack spec: steps must be >= 0");
    if (restarts < 1) throw std::invalid_argument("attack spec: restarts must be >= 1");
    if (restarts > 1 && !rand_init)
        throw std::invalid_argument(
            "attack spec: restarts > 1 without rand_init would repeat identical runs");
}

Tensor sample_linf(const std::vector<int>& shape, double eps, Rng& rng) {
    Tensor t = Tensor::zeros(shape);
    for (auto& v : t.data) v = static_cast<Scalar>(rng.uniform(-eps, eps));
    return t;
}

Tensor sample_l2_ball(const std::vector<int>& shape, double eps, Rng& rng) {
    Tensor t = Tensor::zeros(shape);
    double norm2 = 0;
    for (auto& v : t.data) {
        double g = rng.normal();
        norm2 += g * g;
        v = static_cast<Scalar>(g);
    }
    double u = rng.uniform01();
    double norm = std::sqrt(norm2);
    if (norm == 0) return t;  // degenerate direction, keep the origin
    double d = static_cast<double>(t.numel());
    double f = eps * std::pow(u, 1.0 / d) / norm;
    for (auto& v : t.data) v = static_cast<Scalar>(static_cast<double>(v) * f);
    return t;
}

namespace {

void project_span(Scalar* d, int64_t n, Norm norm, double eps) {
    if (norm == Norm::linf) {
        Scalar e = static_cast<Scalar>(eps);
        for (int64_t i = 0; i < n; ++i) d[i] = std::min(std::max(d[i], -e), e);
    } else {
        double s = 0;
        for (int64_t i = 0; i < n; ++i) s += static_cast<double>(d[i]) * d[i];
        s = std::sqrt(s);
        if (s > eps) {
            Scalar f = static_cast<Scalar>(eps / s);
            for (int64_t i = 0; i < n; ++i) d[i] *= f;
        }
    }
}

// coordinatewise clamp to [-x, 1-x], then ulp nudges so x + d lands in
// [0,1] exactly; each nudge shrinks |d|, so norm budgets survive
void clamp_span(Scalar* d, const Scalar* x, int64_t n) {
    for (int64_t i = 0; i < n; ++i) {
        Scalar lo = -x[i], hi = Scalar(1) - x[i];
        if (d[i] < lo) d[i] = lo;
        if (d[i] > hi) d[i] = hi;
        while (x[i] + d[i] > Scalar(1))
            d[i] = std::nextafter(d[i], -std::numeric_limits<Scalar>::infinity());
        while (x[i] + d[i] < Scalar(0))
            d[i] = std::nextafter(d[i], std::numeric_limits<Scalar>::infinity());
    }
}

void check_domain(const Tensor& X) {
    for (int64_t i = 0; i < X.numel(); ++i)
        if (!(X[i] >= Scalar(0) && X[i] <= Scalar(1)))
            throw std::invalid_argument("attack: input pixel outside [0,1] at flat index " +
                                        std::to_string(i));
}

Tensor add_rows(const Tensor& X, const Tensor& D) {
    Tensor out = X;
    for (int64_t i = 0; i < out.numel(); ++i) out[i] += D[i];
    return out;
}

}  // namespace

Tensor project(Tensor delta, Norm norm, double eps) {
    if (eps < 0) throw std::invalid_argument("project: eps must be >= 0");
    project_span(delta.ptr(), delta.numel(), norm, eps);
    return delta;
}

Tensor clamp_to_domain(Tensor delta, const Tensor& x) {
    if (!delta.same_shape(x))
        throw std::invalid_argument("clamp_to_domain: shape mismatch " + delta.shape_str() +
                                    " vs " + x.shape_str());
    check_domain(x);
    clamp_span(delta.ptr(), x.ptr(), delta.numel());
    return delta;
}

std::vector<AttackResult> attack_batch(const Model& m, const Tensor& X, const std::vector<int>& y,
                                       const PerturbationSpec& spec,
                                       const std::vector<uint64_t>& sample_seeds,
                                       StepObserver* observer) {
    spec.validate();
    if (spec.is_targeted() && spec.targeted >= m.config.classes)
        throw std::invalid_argument("attack spec: target class " + std::to_string(spec.targeted) +
                                    " out of range for " + std::to_string(m.config.classes) +
                                    " classes");

    // normalize to batch form: dim 0 must index the samples
    Tensor Xb = X;
    int sample_rank = static_cast<int>(m.config.input_shape.size());
    if (Xb.rank() == sample_rank) Xb.shape.insert(Xb.shape.begin(), 1);
    if (Xb.rank() != sample_rank + 1)
        throw std::invalid_argument("attack: input " + X.shape_str() +
                                    " does not match model input " +
                                    shape_str(m.config.input_shape));
    int B = Xb.dim(0);
    if (B != static_cast<int>(y.size()))
        throw std::invalid_argument("attack: batch of " + std::to_string(y.size()) +
                                    " labels does not match input " + X.shape_str());
    if (sample_seeds.size() != y.size())
        throw std::invalid_argument("attack: need one seed per sample, got " +
                                    std::to_string(sample_seeds.size()) + " for " +
                                    std::to_string(y.size()));
    check_domain(Xb);
    for (int label : y)
        if (label < 0 || label >= m.config.classes)
            throw std::invalid_argument("attack: label " + std::to_string(label) +
                                        " out of range");

    int64_t S = Xb.numel() / B;
    std::vector<int> sample_shape(Xb.shape.begin() + 1, Xb.shape.end());
    double alpha = spec.resolved_step();
    std::vector<int> graph_labels =
        spec.is_targeted() ? std::vector<int>(y.size(), spec.targeted) : y;

    std::vector<AttackResult> best(y.size());
    for (int r = 0; r < spec.restarts; ++r) {
        Tensor D = Tensor::zeros(Xb.shape);
        if (spec.rand_init) {
            for (int i = 0; i < B; ++i) {
                Rng rng(mix(sample_seeds[static_cast<size_t>(i)], static_cast<uint64_t>(r)));
                Tensor di = spec.norm == Norm::l2 ? sample_l2_ball(sample_shape, spec.eps, rng)
                                                  : sample_linf(sample_shape, spec.eps, rng);
                std::copy_n(di.ptr(), S, D.ptr() + i * S);
            }
        }
        if (spec.steps == 0) {
            for (int i = 0; i < B; ++i) {
                project_span(D.ptr() + i * S, S, spec.norm, spec.eps);
                clamp_span(D.ptr() + i * S, Xb.ptr() + i * S, S);
            }
        }
        for (int k = 0; k < spec.steps; ++k) {
            ModelGraph mg = build_loss_graph(m, add_rows(Xb, D), graph_labels, true, false,
                                             Reduction::sum);
            if (observer)
                observer->on_step(r, k - 1,
                                  cross_entropy_rows(mg.g.value(mg.logits), graph_labels));
            mg.g.backward(mg.loss);
            const Tensor& G = mg.g.gradient("x");
            for (int i = 0; i < B; ++i) {
                const Scalar* g = G.ptr() + i * S;
                Scalar* d = D.ptr() + i * S;
                double a = spec.is_targeted() ? -alpha : alpha;
                if (spec.norm == Norm::linf) {
                    for (int64_t j = 0; j < S; ++j) {
                        if (g[j] > 0)
                            d[j] += static_cast<Scalar>(a);
                        else if (g[j] < 0)
                            d[j] -= static_cast<Scalar>(a);
                    }
                } else {
                    double nrm = 0;
                    for (int64_t j = 0; j < S; ++j) nrm += static_cast<double>(g[j]) * g[j];
                    nrm = std::sqrt(nrm);
                    if (nrm > 0) {
                        double f = a / nrm;
                        for (int64_t j = 0; j < S; ++j)
                            d[j] += static_cast<Scalar>(f * static_cast<double>(g[j]));
                    }
                }
                project_span(d, S, spec.norm, spec.eps);
                clamp_span(d, Xb.ptr() + i * S, S);
            }
        }

        // evaluate the restart's final iterate
        Tensor logit_vals;
        {
            ModelGraph mg = build_forward_graph(m, add_rows(Xb, D), false, false);
            logit_vals = mg.g.value(mg.logits);
        }
        std::vector<double> losses = cross_entropy_rows(logit_vals, graph_labels);
        if (observer) observer->on_step(r, spec.steps - 1, losses);
        std::vector<int> preds = argmax_rows(logit_vals);
        for (int i = 0; i < B; ++i) {
            bool better =
                r == 0 || (spec.is_targeted() ? losses[static_cast<size_t>(i)] <
                                                    best[static_cast<size_t>(i)].loss
                                              : losses[static_cast<size_t>(i)] >
                                                    best[static_cast<size_t>(i)].loss);
            if (!better) continue;
            AttackResult& out = best[static_cast<size_t>(i)];
            out.delta = Tensor::zeros(sample_shape);
            std::copy_n(D.ptr() + i * S, S, out.delta.ptr());
            out.loss = losses[static_cast<size_t>(i)];
            out.success = spec.is_targeted() ? preds[static_cast<size_t>(i)] == spec.targeted
                                             : preds[static_cast<size_t>(i)] != y[static_cast<size_t>(i)];
        }
    }
    return best;
}

Tensor perturb_batch(const Model& m, const Tensor& X, const std::vector<int>& y,
                     const PerturbationSpec& spec, const std::vector<uint64_t>& sample_seeds) {
    auto results = attack_batch(m, X, y, spec, sample_seeds);
    Tensor out = X;
    int64_t S = out.numel() / static_cast<int64_t>(results.size());
    for (size_t i = 0; i < results.size(); ++i) {
        const Tensor& d = results[i].delta;
        Scalar* row = out.ptr() + static_cast<int64_t>(i) * S;
        for (int64_t j = 0; j < S; ++j) row[j] += d[j];
    }
    return out;
}

AttackResult pgd(const Model& m, const Tensor& x, int y, const PerturbationSpec& spec) {
    return attack_batch(m, x, {y}, spec, {mix(spec.rng_seed, 0)})[0];
}

AttackResult fgsm(const Model& m, const Tensor& x, int y, double eps) {
    PerturbationSpec spec;
    spec.norm = Norm::linf;
    spec.eps = eps;
    spec.step_size = eps;
    spec.steps = 1;
    return pgd(m, x, y, spec);
}

AttackResult fast_l2(const Model& m, const Tensor& x, int y, double eps, double alpha,
                     uint64_t seed) {
    PerturbationSpec spec;
    spec.norm = Norm::l2;
    spec.eps = eps;
    spec.step_size = alpha;
    spec.steps = 1;
    spec.rand_init = true;
    spec.rng_seed = seed;
    return pgd(m, x, y, spec);
}

}  // namespace rt
