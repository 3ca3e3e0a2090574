#include "rt/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rt {

ModelConfig ModelConfig::mlp_tiny(std::vector<int> input_shape, int classes) {
    ModelConfig c;
    c.kind = Kind::mlp;
    c.input_shape = std::move(input_shape);
    c.hidden = {64, 64};
    c.classes = classes;
    c.validate();
    return c;
}

ModelConfig ModelConfig::rescnn_tiny(std::vector<int> input_shape, int classes) {
    ModelConfig c;
    c.kind = Kind::rescnn;
    c.input_shape = std::move(input_shape);
    c.widths = {8, 16, 32};
    c.blocks_per_stage = 1;
    c.classes = classes;
    c.validate();
    return c;
}

int ModelConfig::input_dim() const {
    return static_cast<int>(shape_numel(input_shape));
}

int ModelConfig::representation_dim() const {
    return kind == Kind::mlp ? hidden.back() : widths.back();
}

void ModelConfig::validate() const {
    if (classes < 2) throw std::invalid_argument("model config: classes must be >= 2");
    if (input_shape.empty()) throw std::invalid_argument("model config: empty input shape");
    for (int d : input_shape)
        if (d <= 0) throw std::invalid_argument("model config: non-positive input dim");
    if (kind == Kind::mlp) {
        if (hidden.empty()) throw std::invalid_argument("model config: mlp needs hidden widths");
        for (int h : hidden)
            if (h <= 0) throw std::invalid_argument("model config: non-positive hidden width");
    } else {
        if (input_shape.size() != 3)
            throw std::invalid_argument("model config: rescnn input must be (C,H,W), got " +
                                        shape_str(input_shape));
        if (input_shape[1] != input_shape[2])
            throw std::invalid_argument("model config: rescnn input must be square, got " +
                                        shape_str(input_shape));
        if (widths.empty()) throw std::invalid_argument("model config: rescnn needs stage widths");
        for (int w : widths)
            if (w <= 0) throw std::invalid_argument("model config: non-positive stage width");
        if (blocks_per_stage < 1)
            throw std::invalid_argument("model config: blocks_per_stage must be >= 1");
        // every stage past the first halves the spatial size
        int side = input_shape[1];
        for (size_t s = 1; s < widths.size(); ++s) side = (side + 1) / 2;
        if (side < 1) throw std::invalid_argument("model config: too many stages for input size");
    }
}

int64_t Model::parameter_count() const {
    int64_t n = 0;
    for (const auto& [name, t] : params) n += t.numel();
    return n;
}

bool Model::has_param(const std::string& name) const {
    for (const auto& [k, t] : params)
        if (k == name) return true;
    return false;
}

Tensor& Model::param(const std::string& name) {
    for (auto& [k, t] : params)
        if (k == name) return t;
    throw std::invalid_argument("unknown parameter '" + name + "'");
}

const Tensor& Model::param(const std::string& name) const {
    for (const auto& [k, t] : params)
        if (k == name) return t;
    throw std::invalid_argument("unknown parameter '" + name + "'");
}

std::vector<std::string> Model::param_names() const {
    std::vector<std::string> out;
    out.reserve(params.size());
    for (const auto& [k, t] : params) out.push_back(k);
    return out;
}

std::vector<std::string> Model::sorted_param_names() const {
    auto out = param_names();
    std::sort(out.begin(), out.end());
    return out;
}

namespace {

Tensor init_tensor(std::vector<int> shape, int fan_in, Rng& rng) {
    Tensor t = Tensor::zeros(std::move(shape));
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (auto& v : t.data) v = static_cast<Scalar>(rng.uniform(-bound, bound));
    return t;
}

void add_linear(Model& m, const std::string& prefix, int in, int out, Rng& rng) {
    m.params.emplace_back(prefix + ".w", init_tensor({in, out}, in, rng));
    m.params.emplace_back(prefix + ".b", init_tensor({out}, in, rng));
}

void add_conv(Model& m, const std::string& prefix, int cin, int cout, int k, Rng& rng) {
    int fan_in = cin * k * k;
    m.params.emplace_back(prefix + ".w", init_tensor({cout, cin, k, k}, fan_in, rng));
    m.params.emplace_back(prefix + ".b", init_tensor({cout}, fan_in, rng));
}

}  // namespace

Model build_model(const ModelConfig& cfg, uint64_t seed) {
    cfg.validate();
    Model m;
    m.config = cfg;
    Rng rng(mix(seed, 0x6d6f64656cULL));  // "model"
    if (cfg.kind == ModelConfig::Kind::mlp) {
        int in = cfg.input_dim();
        for (size_t i = 0; i < cfg.hidden.size(); ++i) {
            add_linear(m, "fc" + std::to_string(i), in, cfg.hidden[i], rng);
            in = cfg.hidden[i];
        }
        add_linear(m, "head", in, cfg.classes, rng);
    } else {
        int cin = cfg.input_shape[0];
        add_conv(m, "stem", cin, cfg.widths[0], 3, rng);
        for (size_t s = 0; s < cfg.widths.size(); ++s) {
            std::string sp = "s" + std::to_string(s);
            if (s > 0) add_conv(m, sp + ".down", cfg.widths[s - 1], cfg.widths[s], 3, rng);
            for (int b = 0; b < cfg.blocks_per_stage; ++b) {
                std::string bp = sp + ".b" + std::to_string(b);
                add_conv(m, bp + ".c1", cfg.widths[s], cfg.widths[s], 3, rng);
                add_conv(m, bp + ".c2", cfg.widths[s], cfg.widths[s], 3, rng);
            }
            m.params.emplace_back(sp + ".gamma", Tensor::scalar(1));
        }
        add_linear(m, "head", cfg.widths.back(), cfg.classes, rng);
    }
    return m;
}

namespace {

// Normalizes X to batch form for the model input; sets promoted when a
// single sample was handed in without its batch dim.
Tensor to_batch(const ModelConfig& cfg, Tensor X, bool& promoted) {
    const auto& is = cfg.input_shape;
    int r = static_cast<int>(is.size());
    promoted = false;
    auto matches_input = [&](int offset) {
        for (int i = 0; i < r; ++i)
            if (X.dim(offset + i) != is[static_cast<size_t>(i)]) return false;
        return true;
    };
    if (X.rank() == r + 1 && matches_input(1)) return X;
    if (X.rank() == r && matches_input(0)) {
        promoted = true;
        X.shape.insert(X.shape.begin(), 1);
        return X;
    }
    if (cfg.kind == ModelConfig::Kind::mlp) {
        // an mlp accepts anything with the right flattened size
        int64_t d = cfg.input_dim();
        if (X.rank() >= 2 && X.numel() % X.dim(0) == 0 && X.numel() / X.dim(0) == d) {
            int b = X.dim(0);
            X.shape = {b, static_cast<int>(d)};
            return X;
        }
        if (X.numel() == d) {
            promoted = true;
            X.shape = {1, static_cast<int>(d)};
            return X;
        }
    }
    throw std::invalid_argument("input shape " + X.shape_str() + " does not match model input " +
                                shape_str(is));
}

struct BodyOut {
    Val features;
    Val logits;
};

BodyOut build_body(Graph& g, const Model& m, Val x, bool param_grad) {
    const ModelConfig& cfg = m.config;
    auto P = [&](const std::string& name) { return g.input(name, m.param(name), param_grad); };

    Val h;
    Val feat;
    if (cfg.kind == ModelConfig::Kind::mlp) {
        int b = g.value(x).dim(0);
        h = g.reshape(x, {b, cfg.input_dim()});
        for (size_t i = 0; i < cfg.hidden.size(); ++i) {
            std::string p = "fc" + std::to_string(i);
            h = g.relu(g.add(g.matmul(h, P(p + ".w")), P(p + ".b")));
        }
        feat = h;
    } else {
        h = g.relu(g.add(g.conv2d(x, P("stem.w"), 1, 1), P("stem.b")));
        for (size_t s = 0; s < cfg.widths.size(); ++s) {
            std::string sp = "s" + std::to_string(s);
            if (s > 0) h = g.relu(g.add(g.conv2d(h, P(sp + ".down.w"), 2, 1), P(sp + ".down.b")));
            Val gamma = P(sp + ".gamma");
            for (int bl = 0; bl < cfg.blocks_per_stage; ++bl) {
                std::string bp = sp + ".b" + std::to_string(bl);
                Val t = g.relu(g.add(g.conv2d(h, P(bp + ".c1.w"), 1, 1), P(bp + ".c1.b")));
                t = g.add(g.conv2d(t, P(bp + ".c2.w"), 1, 1), P(bp + ".c2.b"));
                h = g.relu(g.add(h, g.scale(t, gamma)));
            }
        }
        feat = g.global_avg_pool(h);
    }
    Val out = g.add(g.matmul(feat, P("head.w")), P("head.b"));
    return {feat, out};
}

}  // namespace

ModelGraph build_forward_graph(const Model& m, Tensor X, bool x_grad, bool param_grad) {
    ModelGraph mg;
    mg.x = mg.g.input("x", to_batch(m.config, std::move(X), mg.promoted), x_grad);
    auto body = build_body(mg.g, m, mg.x, param_grad);
    mg.features = body.features;
    mg.logits = body.logits;
    return mg;
}

ModelGraph build_loss_graph(const Model& m, Tensor X, const std::vector<int>& labels, bool x_grad,
                            bool param_grad, Reduction red) {
    ModelGraph mg = build_forward_graph(m, std::move(X), x_grad, param_grad);
    mg.loss = mg.g.softmax_cross_entropy(mg.logits, labels, red);
    return mg;
}

namespace {

Tensor squeeze_if(Tensor t, bool promoted) {
    if (promoted && t.rank() >= 2 && t.dim(0) == 1) t.shape.erase(t.shape.begin());
    return t;
}

}  // namespace

Tensor logits(const Model& m, const Tensor& X) {
    ModelGraph mg = build_forward_graph(m, X, false, false);
    return squeeze_if(mg.g.value(mg.logits), mg.promoted);
}

Tensor features(const Model& m, const Tensor& X) {
    ModelGraph mg = build_forward_graph(m, X, false, false);
    return squeeze_if(mg.g.value(mg.features), mg.promoted);
}

}  // namespace rt
