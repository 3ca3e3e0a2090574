#include "rt/representation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace rt {

namespace {

void clamp01(Tensor& t) {
    for (auto& v : t.data) v = std::min(std::max(v, Scalar(0)), Scalar(1));
}

// projects x onto the l2 ball of radius eps around center (eps <= 0: no-op)
void project_around(Tensor& x, const Tensor& center, double eps) {
    if (eps <= 0) return;
    double s = 0;
    for (int64_t i = 0; i < x.numel(); ++i) {
        double d = static_cast<double>(x[i]) - static_cast<double>(center[i]);
        s += d * d;
    }
    s = std::sqrt(s);
    if (s > eps) {
        double f = eps / s;
        for (int64_t i = 0; i < x.numel(); ++i)
            x[i] = center[i] + static_cast<Scalar>(f * (static_cast<double>(x[i]) - center[i]));
    }
}

// unit-normalized copy of g; zero when ||g|| = 0
bool normalize(const Tensor& g, Tensor& out) {
    double s = 0;
    for (Scalar v : g.data) s += static_cast<double>(v) * v;
    s = std::sqrt(s);
    if (s == 0) return false;
    out = g;
    for (auto& v : out.data) v = static_cast<Scalar>(static_cast<double>(v) / s);
    return true;
}

Tensor selector_column(int dim, int node) {
    Tensor sel = Tensor::zeros({dim, 1});
    sel[node] = 1;
    return sel;
}

}  // namespace

VizResult feature_viz(const Model& m, const Tensor& seed, const VizRequest& req) {
    int rep = m.config.representation_dim();
    if (req.node < 0 || req.node >= rep)
        throw std::invalid_argument("feature_viz: node " + std::to_string(req.node) +
                                    " out of range [0," + std::to_string(rep) + ")");
    if (req.steps < 0) throw std::invalid_argument("feature_viz: negative steps");
    if (!(req.step_size > 0)) throw std::invalid_argument("feature_viz: step size must be > 0");

    VizResult res;
    Tensor x = seed;
    clamp01(x);
    res.image = x;
    res.activation = -std::numeric_limits<double>::infinity();

    for (int k = 0; k <= req.steps; ++k) {
        ModelGraph mg = build_forward_graph(m, x, true, false);
        Val sel = mg.g.constant(selector_column(rep, req.node));
        Val act = mg.g.matmul(mg.features, sel);  // (1,1)
        double a = static_cast<double>(mg.g.value(act)[0]);
        res.trace.push_back(a);
        if (a > res.activation) {
            res.activation = a;
            res.image = x;
        }
        if (k == req.steps) break;
        mg.g.backward(act);
        const Tensor& g = mg.g.gradient("x");
        Tensor dir;
        if (!normalize(g, dir)) break;  // stationary, later steps cannot move
        for (int64_t i = 0; i < x.numel(); ++i)
            x[i] += static_cast<Scalar>(req.step_size) * dir[i];
        project_around(x, seed, req.eps);
        clamp01(x);
    }
    return res;
}

InterpResult interpolate(const Model& m, const Tensor& x1, const Tensor& x2,
                         const InterpRequest& req) {
    if (!x1.same_shape(x2))
        throw std::invalid_argument("interpolate: endpoint shapes differ, " + x1.shape_str() +
                                    " vs " + x2.shape_str());
    if (req.lambda < 0 || req.lambda > 1)
        throw std::invalid_argument("interpolate: lambda must be in [0,1]");
    if (req.steps < 0) throw std::invalid_argument("interpolate: negative steps");
    if (!(req.step_size > 0)) throw std::invalid_argument("interpolate: step size must be > 0");

    Scalar lam = static_cast<Scalar>(req.lambda);
    Tensor f1 = features(m, x1);
    Tensor f2 = features(m, x2);
    Tensor target = f1;
    for (int64_t i = 0; i < target.numel(); ++i)
        target[i] = req.difference_target ? lam * f1[i] - (Scalar(1) - lam) * f2[i]
                                          : lam * f1[i] + (Scalar(1) - lam) * f2[i];
    if (target.rank() == 1) target.shape = {1, target.dim(0)};
    int rep = target.dim(1);

    Tensor x = x1;
    for (int64_t i = 0; i < x.numel(); ++i) x[i] = lam * x1[i] + (Scalar(1) - lam) * x2[i];
    clamp01(x);

    InterpResult res;
    res.image = x;
    res.distance = std::numeric_limits<double>::infinity();
    Tensor ones = Tensor::full({rep, 1}, 1);

    for (int k = 0; k <= req.steps; ++k) {
        ModelGraph mg = build_forward_graph(m, x, true, false);
        Val t = mg.g.constant(target);
        Val diff = mg.g.sub(mg.features, t);
        Val sq = mg.g.mul(diff, diff);
        Val obj = mg.g.matmul(sq, mg.g.constant(ones));  // (1,1) squared distance
        double dist = std::sqrt(static_cast<double>(mg.g.value(obj)[0]));
        res.trace.push_back(dist);
        if (dist < res.distance) {
            res.distance = dist;
            res.image = x;
        }
        if (k == req.steps) break;
        mg.g.backward(obj);
        const Tensor& g = mg.g.gradient("x");
        Tensor dir;
        if (!normalize(g, dir)) break;
        for (int64_t i = 0; i < x.numel(); ++i)
            x[i] -= static_cast<Scalar>(req.step_size) * dir[i];
        clamp01(x);
    }
    return res;
}

namespace {

struct TraceRecorder final : StepObserver {
    std::vector<double> trace;
    void on_step(int restart, int /*step*/, const std::vector<double>& losses) override {
        if (restart == 0) trace.push_back(losses.at(0));
    }
};

}  // namespace

TargetedResult targeted_perturbation(const Model& m, const Tensor& x, int target_class,
                                     PerturbationSpec spec) {
    spec.targeted = target_class;
    TraceRecorder rec;
    auto results =
        attack_batch(m, x, {0 /*true label unused for targeted*/}, spec,
                     {mix(spec.rng_seed, 0)}, &rec);
    const AttackResult& r = results.at(0);
    TargetedResult out;
    out.delta = r.delta;
    out.image = x;
    for (int64_t i = 0; i < out.image.numel(); ++i) out.image[i] += out.delta[i];
    out.loss = r.loss;
    out.success = r.success;
    out.trace = std::move(rec.trace);
    return out;
}

SmoothnessStats representation_smoothness(const Model& m, const Dataset& d, double probe_eps,
                                          int probes, uint64_t seed) {
    if (probes < 1) throw std::invalid_argument("representation_smoothness: probes must be >= 1");
    if (!(probe_eps > 0))
        throw std::invalid_argument("representation_smoothness: probe_eps must be > 0");
    if (d.size() < 1) throw std::invalid_argument("representation_smoothness: empty dataset");

    Rng rng(mix(seed, 0x500fULL));
    SmoothnessStats st;
    st.ratios.reserve(static_cast<size_t>(probes));
    for (int p = 0; p < probes; ++p) {
        Tensor x = d.sample(rng.uniform_int(d.size()));
        Tensor x2 = x;
        double nrm = 0;
        std::vector<double> dir(static_cast<size_t>(x.numel()));
        for (auto& v : dir) {
            v = rng.normal();
            nrm += v * v;
        }
        nrm = std::sqrt(nrm);
        if (nrm == 0) {
            st.ratios.push_back(0);
            continue;
        }
        for (int64_t i = 0; i < x.numel(); ++i)
            x2[i] = x[i] + static_cast<Scalar>(probe_eps * dir[static_cast<size_t>(i)] / nrm);

        Tensor fa = features(m, x);
        Tensor fb = features(m, x2);
        double fnum = 0, fden = 0;
        for (int64_t i = 0; i < fa.numel(); ++i) {
            double dv = static_cast<double>(fb[i]) - static_cast<double>(fa[i]);
            fnum += dv * dv;
        }
        for (int64_t i = 0; i < x.numel(); ++i) {
            double dv = static_cast<double>(x2[i]) - static_cast<double>(x[i]);
            fden += dv * dv;
        }
        st.ratios.push_back(fden > 0 ? std::sqrt(fnum) / std::sqrt(fden) : 0);
    }

    std::vector<double> sorted = st.ratios;
    std::sort(sorted.begin(), sorted.end());
    size_t n = sorted.size();
    st.median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    st.p90 = sorted[std::min(n - 1, static_cast<size_t>(std::ceil(0.9 * n)) - 1)];
    st.max = sorted.back();
    double s = 0;
    for (double r : sorted) s += r;
    st.mean = s / static_cast<double>(n);
    return st;
}

}  // namespace rt
