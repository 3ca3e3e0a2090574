#pragma once

#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "rt/tensor.hpp"

namespace rt {

// Handle into a Graph. Only valid for the graph that produced it.
struct Val {
    int id = -1;
};

enum class Reduction { mean, sum };

// Reverse-mode tape. Values are computed eagerly as nodes are inserted
// (define-by-run); backward walks the tape in reverse insertion order and
// accumulates exact gradients for every node on a requires-grad path.
// Graphs are cheap and meant to be rebuilt per forward pass.
class Graph {
  public:
    // Leaf with a caller-visible name; gradients are queried by that name.
    Val input(const std::string& name, Tensor value, bool requires_grad);
    // Leaf that never receives a gradient.
    Val constant(Tensor value);

    Val matmul(Val a, Val b);                       // (M,K) x (K,N)
    Val conv2d(Val x, Val w, int stride, int pad);  // x (B,C,H,W), w (F,C,kh,kw)
    Val relu(Val x);
    Val add(Val a, Val b);  // equal shapes, or b rank-1 broadcast (last dim / channel dim)
    Val sub(Val a, Val b);
    Val mul(Val a, Val b);
    Val scale(Val x, Val s);  // s has exactly one element
    Val scale_const(Val x, double c);
    Val global_avg_pool(Val x);  // (B,C,H,W) -> (B,C)
    Val reshape(Val x, std::vector<int> shape);
    // logits (B,C) + one label per row. Mean reduction averages the per-row
    // losses (training); sum keeps each row's gradient free of the 1/B
    // factor so a batched attack step is bitwise equal to per-sample runs.
    Val softmax_cross_entropy(Val logits, std::vector<int> labels, Reduction red);

    const Tensor& value(Val v) const;

    // Propagates from a scalar output. May be called once per graph.
    void backward(Val out);

    bool has_gradient(Val v) const;
    const Tensor& gradient(Val v) const;
    const Tensor& gradient(const std::string& leaf) const;
    Val leaf(const std::string& name) const;
    // Gradients for the named leaves; unknown names are an error.
    std::map<std::string, Tensor> gradients(const std::vector<std::string>& leaves) const;

    size_t size() const { return nodes_.size(); }

  private:
    enum class Op : uint8_t {
        leaf,
        matmul,
        conv2d,
        relu,
        add,
        sub,
        mul,
        scale,
        scale_const,
        gap,
        reshape,
        softmax_ce,
    };

    struct Node {
        Op op;
        int a = -1, b = -1;
        int stride = 1, pad = 0;
        double factor = 0;  // scale_const
        Tensor value;
        Tensor grad;
        Tensor aux;  // softmax probabilities
        std::vector<int> labels;
        Reduction red = Reduction::mean;
        bool requires_grad = false;
        bool grad_live = false;
        std::string name;
    };

    int push(Node n);
    const Node& at(Val v, const char* who) const;
    std::string desc(int id) const;
    void ensure_grad(int id);

    std::vector<Node> nodes_;
    std::unordered_map<std::string, int> leaves_;
    bool backward_done_ = false;
};

// Utilities on raw logits, outside any graph.
std::vector<int> argmax_rows(const Tensor& logits);
// Numerically stable per-row cross entropy at the given labels.
std::vector<double> cross_entropy_rows(const Tensor& logits, const std::vector<int>& labels);

}  // namespace rt
