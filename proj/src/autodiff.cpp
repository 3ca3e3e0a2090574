#include "rt/autodiff.hpp"

#include <cmath>
#include <stdexcept>

#include "gemm.hpp"

namespace rt {

namespace {

const char* op_name(int op) {
    static const char* names[] = {"leaf",  "matmul", "conv2d",      "relu",
                                  "add",   "sub",    "mul",         "scale",
                                  "scale_const", "global_avg_pool", "reshape", "softmax_ce"};
    return names[op];
}

// im2col for one sample: x (C,H,W) -> col (C*kh*kw, OH*OW), zero padding
void im2col(const Scalar* x, int C, int H, int W, int kh, int kw, int stride, int pad, int OH,
            int OW, Scalar* col) {
    for (int c = 0; c < C; ++c) {
        const Scalar* xc = x + static_cast<size_t>(c) * H * W;
        for (int ki = 0; ki < kh; ++ki) {
            for (int kj = 0; kj < kw; ++kj) {
                Scalar* row = col + (static_cast<size_t>(c) * kh * kw + ki * kw + kj) *
                                        (static_cast<size_t>(OH) * OW);
                for (int oy = 0; oy < OH; ++oy) {
                    int iy = oy * stride + ki - pad;
                    Scalar* dst = row + static_cast<size_t>(oy) * OW;
                    if (iy < 0 || iy >= H) {
                        for (int ox = 0; ox < OW; ++ox) dst[ox] = 0;
                        continue;
                    }
                    const Scalar* src = xc + static_cast<size_t>(iy) * W;
                    for (int ox = 0; ox < OW; ++ox) {
                        int ix = ox * stride + kj - pad;
                        dst[ox] = (ix >= 0 && ix < W) ? src[ix] : Scalar(0);
                    }
                }
            }
        }
    }
}

// scatter-add of dcol back onto dx, reverse of im2col
void col2im_add(const Scalar* dcol, int C, int H, int W, int kh, int kw, int stride, int pad,
                int OH, int OW, Scalar* dx) {
    for (int c = 0; c < C; ++c) {
        Scalar* xc = dx + static_cast<size_t>(c) * H * W;
        for (int ki = 0; ki < kh; ++ki) {
            for (int kj = 0; kj < kw; ++kj) {
                const Scalar* row = dcol + (static_cast<size_t>(c) * kh * kw + ki * kw + kj) *
                                               (static_cast<size_t>(OH) * OW);
                for (int oy = 0; oy < OH; ++oy) {
                    int iy = oy * stride + ki - pad;
                    if (iy < 0 || iy >= H) continue;
                    const Scalar* src = row + static_cast<size_t>(oy) * OW;
                    Scalar* dst = xc + static_cast<size_t>(iy) * W;
                    for (int ox = 0; ox < OW; ++ox) {
                        int ix = ox * stride + kj - pad;
                        if (ix >= 0 && ix < W) dst[ix] += src[ox];
                    }
                }
            }
        }
    }
}

}  // namespace

int Graph::push(Node n) {
    if (backward_done_)
        throw std::logic_error("graph already ran backward; build a new graph");
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

const Graph::Node& Graph::at(Val v, const char* who) const {
    if (v.id < 0 || v.id >= static_cast<int>(nodes_.size()))
        throw std::invalid_argument(std::string(who) + ": invalid value handle");
    return nodes_[static_cast<size_t>(v.id)];
}

std::string Graph::desc(int id) const {
    const Node& n = nodes_[static_cast<size_t>(id)];
    std::string s = "node " + std::to_string(id) + " (" + op_name(static_cast<int>(n.op));
    if (!n.name.empty()) s += " '" + n.name + "'";
    return s + ")";
}

Val Graph::input(const std::string& name, Tensor value, bool requires_grad) {
    if (name.empty()) throw std::invalid_argument("input: leaf name must be non-empty");
    if (leaves_.count(name))
        throw std::invalid_argument("input: duplicate leaf name '" + name + "'");
    Node n;
    n.op = Op::leaf;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.name = name;
    int id = push(std::move(n));
    leaves_[name] = id;
    return {id};
}

Val Graph::constant(Tensor value) {
    Node n;
    n.op = Op::leaf;
    n.value = std::move(value);
    return {push(std::move(n))};
}

Val Graph::matmul(Val a, Val b) {
    const Node& na = at(a, "matmul");
    const Node& nb = at(b, "matmul");
    if (na.value.rank() != 2 || nb.value.rank() != 2)
        throw std::invalid_argument("matmul: operands must be rank 2, got " +
                                    na.value.shape_str() + " and " + nb.value.shape_str() +
                                    " at " + desc(a.id) + ", " + desc(b.id));
    int M = na.value.dim(0), K = na.value.dim(1);
    int K2 = nb.value.dim(0), N = nb.value.dim(1);
    if (K != K2)
        throw std::invalid_argument("matmul: inner dims " + std::to_string(K) + " vs " +
                                    std::to_string(K2) + " at " + desc(a.id) + ", " + desc(b.id));
    Node n;
    n.op = Op::matmul;
    n.a = a.id;
    n.b = b.id;
    n.requires_grad = na.requires_grad || nb.requires_grad;
    n.value = Tensor::zeros({M, N});
    detail::gemm_nn(M, K, N, na.value.ptr(), nb.value.ptr(), n.value.ptr(), false);
    return {push(std::move(n))};
}

Val Graph::conv2d(Val x, Val w, int stride, int pad) {
    const Node& nx = at(x, "conv2d");
    const Node& nw = at(w, "conv2d");
    if (nx.value.rank() != 4 || nw.value.rank() != 4)
        throw std::invalid_argument("conv2d: expects x (B,C,H,W) and w (F,C,kh,kw), got " +
                                    nx.value.shape_str() + " and " + nw.value.shape_str());
    if (stride != 1 && stride != 2)
        throw std::invalid_argument("conv2d: stride must be 1 or 2, got " + std::to_string(stride));
    if (pad < 0) throw std::invalid_argument("conv2d: negative padding");
    int B = nx.value.dim(0), C = nx.value.dim(1), H = nx.value.dim(2), W = nx.value.dim(3);
    int F = nw.value.dim(0), Cw = nw.value.dim(1), kh = nw.value.dim(2), kw = nw.value.dim(3);
    if (C != Cw)
        throw std::invalid_argument("conv2d: input has " + std::to_string(C) +
                                    " channels but weight expects " + std::to_string(Cw) + " at " +
                                    desc(x.id) + ", " + desc(w.id));
    int OH = (H + 2 * pad - kh) / stride + 1;
    int OW = (W + 2 * pad - kw) / stride + 1;
    if (H + 2 * pad < kh || W + 2 * pad < kw)
        throw std::invalid_argument("conv2d: kernel " + nw.value.shape_str() +
                                    " larger than padded input " + nx.value.shape_str());
    Node n;
    n.op = Op::conv2d;
    n.a = x.id;
    n.b = w.id;
    n.stride = stride;
    n.pad = pad;
    n.requires_grad = nx.requires_grad || nw.requires_grad;
    n.value = Tensor::zeros({B, F, OH, OW});
    int Kc = C * kh * kw, P = OH * OW;
    std::vector<Scalar> col(static_cast<size_t>(Kc) * P);
    for (int b = 0; b < B; ++b) {
        im2col(nx.value.ptr() + static_cast<size_t>(b) * C * H * W, C, H, W, kh, kw, stride, pad,
               OH, OW, col.data());
        detail::gemm_nn(F, Kc, P, nw.value.ptr(), col.data(),
                        n.value.ptr() + static_cast<size_t>(b) * F * P, false);
    }
    return {push(std::move(n))};
}

Val Graph::relu(Val x) {
    const Node& nx = at(x, "relu");
    Node n;
    n.op = Op::relu;
    n.a = x.id;
    n.requires_grad = nx.requires_grad;
    n.value = nx.value;
    for (auto& v : n.value.data) v = v > Scalar(0) ? v : Scalar(0);
    return {push(std::move(n))};
}

Val Graph::add(Val a, Val b) {
    const Node& na = at(a, "add");
    const Node& nb = at(b, "add");
    Node n;
    n.op = Op::add;
    n.a = a.id;
    n.b = b.id;
    n.requires_grad = na.requires_grad || nb.requires_grad;
    if (na.value.same_shape(nb.value)) {
        n.value = na.value;
        for (int64_t i = 0; i < n.value.numel(); ++i) n.value[i] += nb.value[i];
    } else if (nb.value.rank() == 1 && na.value.rank() == 2 &&
               na.value.dim(1) == nb.value.dim(0)) {
        // row-wise bias
        n.value = na.value;
        int M = na.value.dim(0), N = na.value.dim(1);
        for (int i = 0; i < M; ++i)
            for (int j = 0; j < N; ++j) n.value[static_cast<int64_t>(i) * N + j] += nb.value[j];
    } else if (nb.value.rank() == 1 && na.value.rank() == 4 &&
               na.value.dim(1) == nb.value.dim(0)) {
        // channel bias
        n.value = na.value;
        int B = na.value.dim(0), C = na.value.dim(1);
        int64_t HW = static_cast<int64_t>(na.value.dim(2)) * na.value.dim(3);
        for (int bi = 0; bi < B; ++bi)
            for (int c = 0; c < C; ++c) {
                Scalar bias = nb.value[c];
                Scalar* p = n.value.ptr() + (static_cast<int64_t>(bi) * C + c) * HW;
                for (int64_t i = 0; i < HW; ++i) p[i] += bias;
            }
    } else {
        throw std::invalid_argument("add: incompatible shapes " + na.value.shape_str() + " and " +
                                    nb.value.shape_str() + " at " + desc(a.id) + ", " + desc(b.id));
    }
    return {push(std::move(n))};
}

Val Graph::sub(Val a, Val b) {
    const Node& na = at(a, "sub");
    const Node& nb = at(b, "sub");
    if (!na.value.same_shape(nb.value))
        throw std::invalid_argument("sub: shape mismatch " + na.value.shape_str() + " vs " +
                                    nb.value.shape_str() + " at " + desc(a.id) + ", " + desc(b.id));
    Node n;
    n.op = Op::sub;
    n.a = a.id;
    n.b = b.id;
    n.requires_grad = na.requires_grad || nb.requires_grad;
    n.value = na.value;
    for (int64_t i = 0; i < n.value.numel(); ++i) n.value[i] -= nb.value[i];
    return {push(std::move(n))};
}

Val Graph::mul(Val a, Val b) {
    const Node& na = at(a, "mul");
    const Node& nb = at(b, "mul");
    if (!na.value.same_shape(nb.value))
        throw std::invalid_argument("mul: shape mismatch " + na.value.shape_str() + " vs " +
                                    nb.value.shape_str() + " at " + desc(a.id) + ", " + desc(b.id));
    Node n;
    n.op = Op::mul;
    n.a = a.id;
    n.b = b.id;
    n.requires_grad = na.requires_grad || nb.requires_grad;
    n.value = na.value;
    for (int64_t i = 0; i < n.value.numel(); ++i) n.value[i] *= nb.value[i];
    return {push(std::move(n))};
}

Val Graph::scale(Val x, Val s) {
    const Node& nx = at(x, "scale");
    const Node& ns = at(s, "scale");
    if (ns.value.numel() != 1)
        throw std::invalid_argument("scale: scale operand must have one element, got " +
                                    ns.value.shape_str() + " at " + desc(s.id));
    Node n;
    n.op = Op::scale;
    n.a = x.id;
    n.b = s.id;
    n.requires_grad = nx.requires_grad || ns.requires_grad;
    n.value = nx.value;
    Scalar f = ns.value[0];
    for (auto& v : n.value.data) v *= f;
    return {push(std::move(n))};
}

Val Graph::scale_const(Val x, double c) {
    const Node& nx = at(x, "scale_const");
    Node n;
    n.op = Op::scale_const;
    n.a = x.id;
    n.factor = c;
    n.requires_grad = nx.requires_grad;
    n.value = nx.value;
    Scalar f = static_cast<Scalar>(c);
    for (auto& v : n.value.data) v *= f;
    return {push(std::move(n))};
}

Val Graph::global_avg_pool(Val x) {
    const Node& nx = at(x, "global_avg_pool");
    if (nx.value.rank() != 4)
        throw std::invalid_argument("global_avg_pool: expects (B,C,H,W), got " +
                                    nx.value.shape_str() + " at " + desc(x.id));
    int B = nx.value.dim(0), C = nx.value.dim(1);
    int64_t HW = static_cast<int64_t>(nx.value.dim(2)) * nx.value.dim(3);
    Node n;
    n.op = Op::gap;
    n.a = x.id;
    n.requires_grad = nx.requires_grad;
    n.value = Tensor::zeros({B, C});
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c) {
            const Scalar* p = nx.value.ptr() + (static_cast<int64_t>(b) * C + c) * HW;
            Scalar s = 0;
            for (int64_t i = 0; i < HW; ++i) s += p[i];
            n.value[static_cast<int64_t>(b) * C + c] = s / static_cast<Scalar>(HW);
        }
    return {push(std::move(n))};
}

Val Graph::reshape(Val x, std::vector<int> shape) {
    const Node& nx = at(x, "reshape");
    if (shape_numel(shape) != nx.value.numel())
        throw std::invalid_argument("reshape: cannot view " + nx.value.shape_str() + " as " +
                                    shape_str(shape) + " at " + desc(x.id));
    Node n;
    n.op = Op::reshape;
    n.a = x.id;
    n.requires_grad = nx.requires_grad;
    n.value = nx.value;
    n.value.shape = std::move(shape);
    return {push(std::move(n))};
}

Val Graph::softmax_cross_entropy(Val logits, std::vector<int> labels, Reduction red) {
    const Node& nl = at(logits, "softmax_cross_entropy");
    if (nl.value.rank() != 2)
        throw std::invalid_argument("softmax_cross_entropy: logits must be (B,C), got " +
                                    nl.value.shape_str() + " at " + desc(logits.id));
    int B = nl.value.dim(0), C = nl.value.dim(1);
    if (static_cast<int>(labels.size()) != B)
        throw std::invalid_argument("softmax_cross_entropy: " + std::to_string(labels.size()) +
                                    " labels for batch of " + std::to_string(B));
    for (int y : labels)
        if (y < 0 || y >= C)
            throw std::invalid_argument("softmax_cross_entropy: label " + std::to_string(y) +
                                        " out of range [0," + std::to_string(C) + ")");
    Node n;
    n.op = Op::softmax_ce;
    n.a = logits.id;
    n.requires_grad = nl.requires_grad;
    n.labels = std::move(labels);
    n.red = red;
    n.aux = Tensor::zeros({B, C});
    double total = 0;
    for (int r = 0; r < B; ++r) {
        const Scalar* z = nl.value.ptr() + static_cast<int64_t>(r) * C;
        Scalar* p = n.aux.ptr() + static_cast<int64_t>(r) * C;
        Scalar m = z[0];
        for (int j = 1; j < C; ++j) m = std::max(m, z[j]);
        double denom = 0;
        for (int j = 0; j < C; ++j) denom += std::exp(static_cast<double>(z[j] - m));
        for (int j = 0; j < C; ++j)
            p[j] = static_cast<Scalar>(std::exp(static_cast<double>(z[j] - m)) / denom);
        total += std::log(denom) - static_cast<double>(z[n.labels[static_cast<size_t>(r)]] - m);
    }
    if (n.red == Reduction::mean) total /= B;
    n.value = Tensor::scalar(static_cast<Scalar>(total));
    return {push(std::move(n))};
}

const Tensor& Graph::value(Val v) const { return at(v, "value").value; }

void Graph::ensure_grad(int id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (!n.grad_live) {
        n.grad = Tensor::zeros(n.value.shape);
        n.grad_live = true;
    }
}

void Graph::backward(Val out) {
    const Node& root = at(out, "backward");
    if (root.value.numel() != 1)
        throw std::invalid_argument("backward: output must be scalar, got " +
                                    root.value.shape_str() + " at " + desc(out.id));
    if (!root.requires_grad)
        throw std::invalid_argument("backward: output does not depend on any differentiable leaf");
    if (backward_done_) throw std::logic_error("backward: already ran on this graph");
    backward_done_ = true;

    ensure_grad(out.id);
    nodes_[static_cast<size_t>(out.id)].grad[0] = 1;

    for (int i = out.id; i >= 0; --i) {
        Node& n = nodes_[static_cast<size_t>(i)];
        if (!n.grad_live || !n.requires_grad) continue;
        Node* pa = n.a >= 0 ? &nodes_[static_cast<size_t>(n.a)] : nullptr;
        Node* pb = n.b >= 0 ? &nodes_[static_cast<size_t>(n.b)] : nullptr;
        bool ga = pa && pa->requires_grad;
        bool gb = pb && pb->requires_grad;
        if (ga) ensure_grad(n.a);
        if (gb) ensure_grad(n.b);

        switch (n.op) {
            case Op::leaf:
                break;
            case Op::matmul: {
                int M = pa->value.dim(0), K = pa->value.dim(1), N = pb->value.dim(1);
                if (ga) detail::gemm_nt(M, N, K, n.grad.ptr(), pb->value.ptr(), pa->grad.ptr(), true);
                if (gb) detail::gemm_tn(K, M, N, pa->value.ptr(), n.grad.ptr(), pb->grad.ptr(), true);
                break;
            }
            case Op::conv2d: {
                int B = pa->value.dim(0), C = pa->value.dim(1), H = pa->value.dim(2),
                    W = pa->value.dim(3);
                int F = pb->value.dim(0), kh = pb->value.dim(2), kw = pb->value.dim(3);
                int OH = n.value.dim(2), OW = n.value.dim(3);
                int Kc = C * kh * kw, P = OH * OW;
                std::vector<Scalar> col(static_cast<size_t>(Kc) * P);
                std::vector<Scalar> dcol(ga ? col.size() : 0);
                for (int b = 0; b < B; ++b) {
                    const Scalar* dy = n.grad.ptr() + static_cast<size_t>(b) * F * P;
                    if (gb) {
                        im2col(pa->value.ptr() + static_cast<size_t>(b) * C * H * W, C, H, W, kh,
                               kw, n.stride, n.pad, OH, OW, col.data());
                        detail::gemm_nt(F, P, Kc, dy, col.data(), pb->grad.ptr(), true);
                    }
                    if (ga) {
                        detail::gemm_tn(Kc, F, P, pb->value.ptr(), dy, dcol.data(), false);
                        col2im_add(dcol.data(), C, H, W, kh, kw, n.stride, n.pad, OH, OW,
                                   pa->grad.ptr() + static_cast<size_t>(b) * C * H * W);
                    }
                }
                break;
            }
            case Op::relu: {
                for (int64_t j = 0; j < n.value.numel(); ++j)
                    if (pa->value[j] > Scalar(0)) pa->grad[j] += n.grad[j];
                break;
            }
            case Op::add: {
                if (ga)
                    for (int64_t j = 0; j < n.grad.numel(); ++j) pa->grad[j] += n.grad[j];
                if (gb) {
                    if (pa->value.same_shape(pb->value)) {
                        for (int64_t j = 0; j < n.grad.numel(); ++j) pb->grad[j] += n.grad[j];
                    } else if (pa->value.rank() == 2) {
                        int M = pa->value.dim(0), N = pa->value.dim(1);
                        for (int r = 0; r < M; ++r)
                            for (int j = 0; j < N; ++j)
                                pb->grad[j] += n.grad[static_cast<int64_t>(r) * N + j];
                    } else {
                        int B = pa->value.dim(0), C = pa->value.dim(1);
                        int64_t HW = static_cast<int64_t>(pa->value.dim(2)) * pa->value.dim(3);
                        for (int bi = 0; bi < B; ++bi)
                            for (int c = 0; c < C; ++c) {
                                const Scalar* g =
                                    n.grad.ptr() + (static_cast<int64_t>(bi) * C + c) * HW;
                                Scalar s = 0;
                                for (int64_t j = 0; j < HW; ++j) s += g[j];
                                pb->grad[c] += s;
                            }
                    }
                }
                break;
            }
            case Op::sub: {
                if (ga)
                    for (int64_t j = 0; j < n.grad.numel(); ++j) pa->grad[j] += n.grad[j];
                if (gb)
                    for (int64_t j = 0; j < n.grad.numel(); ++j) pb->grad[j] -= n.grad[j];
                break;
            }
            case Op::mul: {
                if (ga)
                    for (int64_t j = 0; j < n.grad.numel(); ++j)
                        pa->grad[j] += n.grad[j] * pb->value[j];
                if (gb)
                    for (int64_t j = 0; j < n.grad.numel(); ++j)
                        pb->grad[j] += n.grad[j] * pa->value[j];
                break;
            }
            case Op::scale: {
                Scalar f = pb->value[0];
                if (ga)
                    for (int64_t j = 0; j < n.grad.numel(); ++j) pa->grad[j] += f * n.grad[j];
                if (gb) {
                    Scalar s = 0;
                    for (int64_t j = 0; j < n.grad.numel(); ++j) s += n.grad[j] * pa->value[j];
                    pb->grad[0] += s;
                }
                break;
            }
            case Op::scale_const: {
                Scalar f = static_cast<Scalar>(n.factor);
                for (int64_t j = 0; j < n.grad.numel(); ++j) pa->grad[j] += f * n.grad[j];
                break;
            }
            case Op::gap: {
                int B = pa->value.dim(0), C = pa->value.dim(1);
                int64_t HW = static_cast<int64_t>(pa->value.dim(2)) * pa->value.dim(3);
                Scalar inv = Scalar(1) / static_cast<Scalar>(HW);
                for (int b = 0; b < B; ++b)
                    for (int c = 0; c < C; ++c) {
                        Scalar g = n.grad[static_cast<int64_t>(b) * C + c] * inv;
                        Scalar* dst = pa->grad.ptr() + (static_cast<int64_t>(b) * C + c) * HW;
                        for (int64_t j = 0; j < HW; ++j) dst[j] += g;
                    }
                break;
            }
            case Op::reshape: {
                for (int64_t j = 0; j < n.grad.numel(); ++j) pa->grad[j] += n.grad[j];
                break;
            }
            case Op::softmax_ce: {
                int B = pa->value.dim(0), C = pa->value.dim(1);
                Scalar g = n.grad[0];
                if (n.red == Reduction::mean) g /= static_cast<Scalar>(B);
                for (int r = 0; r < B; ++r) {
                    const Scalar* p = n.aux.ptr() + static_cast<int64_t>(r) * C;
                    Scalar* dz = pa->grad.ptr() + static_cast<int64_t>(r) * C;
                    int y = n.labels[static_cast<size_t>(r)];
                    for (int j = 0; j < C; ++j) dz[j] += g * (p[j] - Scalar(j == y));
                }
                break;
            }
        }
    }
}

bool Graph::has_gradient(Val v) const { return at(v, "has_gradient").grad_live; }

const Tensor& Graph::gradient(Val v) const {
    const Node& n = at(v, "gradient");
    if (!n.grad_live)
        throw std::logic_error("gradient: no gradient at " + desc(v.id) +
                               " (not on a differentiable path, or backward not run)");
    return n.grad;
}

Val Graph::leaf(const std::string& name) const {
    auto it = leaves_.find(name);
    if (it == leaves_.end()) throw std::invalid_argument("unknown leaf '" + name + "'");
    return {it->second};
}

const Tensor& Graph::gradient(const std::string& name) const { return gradient(leaf(name)); }

std::map<std::string, Tensor> Graph::gradients(const std::vector<std::string>& names) const {
    std::map<std::string, Tensor> out;
    for (const auto& name : names) out[name] = gradient(name);
    return out;
}

std::vector<int> argmax_rows(const Tensor& logits) {
    if (logits.rank() != 2)
        throw std::invalid_argument("argmax_rows: expects (B,C), got " + logits.shape_str());
    int B = logits.dim(0), C = logits.dim(1);
    std::vector<int> out(static_cast<size_t>(B));
    for (int r = 0; r < B; ++r) {
        const Scalar* z = logits.ptr() + static_cast<int64_t>(r) * C;
        int best = 0;
        for (int j = 1; j < C; ++j)
            if (z[j] > z[best]) best = j;
        out[static_cast<size_t>(r)] = best;
    }
    return out;
}

std::vector<double> cross_entropy_rows(const Tensor& logits, const std::vector<int>& labels) {
    if (logits.rank() != 2)
        throw std::invalid_argument("cross_entropy_rows: expects (B,C), got " + logits.shape_str());
    int B = logits.dim(0), C = logits.dim(1);
    if (static_cast<int>(labels.size()) != B)
        throw std::invalid_argument("cross_entropy_rows: label count mismatch");
    std::vector<double> out(static_cast<size_t>(B));
    for (int r = 0; r < B; ++r) {
        const Scalar* z = logits.ptr() + static_cast<int64_t>(r) * C;
        int y = labels[static_cast<size_t>(r)];
        if (y < 0 || y >= C)
            throw std::invalid_argument("cross_entropy_rows: label out of range");
        double m = z[0];
        for (int j = 1; j < C; ++j) m = std::max(m, static_cast<double>(z[j]));
        double denom = 0;
        for (int j = 0; j < C; ++j) denom += std::exp(static_cast<double>(z[j]) - m);
        out[static_cast<size_t>(r)] = std::log(denom) - (static_cast<double>(z[y]) - m);
    }
    return out;
}

}  // namespace rt
