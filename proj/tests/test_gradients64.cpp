#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "doctest.h"
#include "rt/autodiff.hpp"

using namespace rt;

// Central finite differences at h = 1e-6 against the tape's gradients.
// These run on the double precision core so the oracle is trustworthy;
// truncation error is O(h^2), roundoff O(eps/h), both far below tol.

namespace {

using Leaves = std::map<std::string, Tensor>;
using Build = std::function<Val(Graph&, const Leaves&)>;

Tensor pat(std::vector<int> shape, double amp, double phase) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (int64_t i = 0; i < t.numel(); ++i)
        t[i] = Scalar(amp * std::sin(0.7 * static_cast<double>(i) + phase));
    return t;
}

// Reduces y to one element through a fixed uneven weighting so every
// coordinate of y influences the output differently.
Val weighted_sum(Graph& g, Val y) {
    int64_t n = g.value(y).numel();
    Tensor w = Tensor::zeros({1, static_cast<int>(n)});
    for (int64_t i = 0; i < n; ++i)
        w[i] = Scalar(0.2 + 0.6 * std::cos(1.3 * static_cast<double>(i)));
    Val flat = g.reshape(y, {static_cast<int>(n), 1});
    return g.matmul(g.constant(w), flat);
}

void check_gradients(const Build& build, const Leaves& leaves) {
    const double h = 1e-6, tol = 1e-6;
    Graph g;
    Val out = build(g, leaves);
    REQUIRE(g.value(out).numel() == 1);
    g.backward(out);

    for (const auto& [name, base] : leaves) {
        const Tensor& ad = g.gradient(name);
        REQUIRE(ad.shape == base.shape);
        for (int64_t i = 0; i < base.numel(); ++i) {
            auto eval = [&](double delta) {
                Leaves moved = leaves;
                moved[name][i] += Scalar(delta);
                Graph gg;
                return static_cast<double>(gg.value(build(gg, moved))[0]);
            };
            double fd = (eval(h) - eval(-h)) / (2 * h);
            double err = std::abs(fd - static_cast<double>(ad[i]));
            double bound = tol * std::max(1.0, std::abs(fd));
            CHECK_MESSAGE(err <= bound, name << "[" << i << "]: fd " << fd << " vs ad " << ad[i]);
        }
    }
}

}  // namespace

TEST_CASE("matmul gradients match finite differences") {
    Leaves L{{"a", pat({3, 4}, 0.8, 0.1)}, {"b", pat({4, 2}, 1.1, 2.0)}};
    check_gradients(
        [](Graph& g, const Leaves& L) {
            Val a = g.input("a", L.at("a"), true);
            Val b = g.input("b", L.at("b"), true);
            return weighted_sum(g, g.matmul(a, b));
        },
        L);
}

TEST_CASE("conv2d stride 1 gradients match finite differences") {
    Leaves L{{"x", pat({2, 2, 5, 5}, 0.9, 0.4)}, {"w", pat({3, 2, 3, 3}, 0.7, 1.7)}};
    check_gradients(
        [](Graph& g, const Leaves& L) {
            Val x = g.input("x", L.at("x"), true);
            Val w = g.input("w", L.at("w"), true);
            return weighted_sum(g, g.conv2d(x, w, 1, 0));
        },
        L);
}

TEST_CASE("conv2d stride 2 with padding gradients match finite differences") {
    Leaves L{{"x", pat({1, 2, 5, 5}, 1.0, 0.9)}, {"w", pat({2, 2, 3, 3}, 0.6, 2.3)}};
    check_gradients(
        [](Graph& g, const Leaves& L) {
            Val x = g.input("x", L.at("x"), true);
            Val w = g.input("w", L.at("w"), true);
            return weighted_sum(g, g.conv2d(x, w, 2, 1));
        },
        L);
}

TEST_CASE("relu gradients match finite differences away from the kink") {
    Tensor x = Tensor::from({7}, {Scalar(-2), Scalar(-0.5), Scalar(-0.01), Scalar(0.01),
                                  Scalar(0.6), Scalar(3), Scalar(-1.2)});
    check_gradients(
        [](Graph& g, const Leaves& L) {
            return weighted_sum(g, g.relu(g.input("x", L.at("x"), true)));
        },
        {{"x", x}});
}

TEST_CASE("bias broadcast add gradients match finite differences") {
    SUBCASE("over the last dim of a matrix") {
        Leaves L{{"a", pat({3, 4}, 0.5, 0.2)}, {"b", pat({4}, 0.9, 1.1)}};
        check_gradients(
            [](Graph& g, const Leaves& L) {
                Val a = g.input("a", L.at("a"), true);
                Val b = g.input("b", L.at("b"), true);
                return weighted_sum(g, g.add(a, b));
            },
            L);
    }
    SUBCASE("over the channel dim of a feature map") {
        Leaves L{{"a", pat({2, 3, 2, 2}, 0.5, 0.6)}, {"b", pat({3}, 0.8, 0.3)}};
        check_gradients(
            [](Graph& g, const Leaves& L) {
                Val a = g.input("a", L.at("a"), true);
                Val b = g.input("b", L.at("b"), true);
                return weighted_sum(g, g.add(a, b));
            },
            L);
    }
}

TEST_CASE("sub and mul gradients match finite differences") {
    Leaves L{{"a", pat({2, 3}, 1.2, 0.1)},
             {"b", pat({2, 3}, 0.7, 1.9)},
             {"c", pat({2, 3}, 0.9, 3.1)}};
    check_gradients(
        [](Graph& g, const Leaves& L) {
            Val a = g.input("a", L.at("a"), true);
            Val b = g.input("b", L.at("b"), true);
            Val c = g.input("c", L.at("c"), true);
            return weighted_sum(g, g.mul(g.sub(a, b), c));
        },
        L);
}

TEST_CASE("scale and scale_const gradients match finite differences") {
    Leaves L{{"x", pat({2, 3}, 1.0, 0.5)}, {"s", Tensor::from({1}, {Scalar(0.8)})}};
    check_gradients(
        [](Graph& g, const Leaves& L) {
            Val x = g.input("x", L.at("x"), true);
            Val s = g.input("s", L.at("s"), true);
            return weighted_sum(g, g.scale_const(g.scale(x, s), -2.5));
        },
        L);
}

TEST_CASE("global average pool gradients match finite differences") {
    Leaves L{{"x", pat({2, 3, 4, 4}, 1.0, 0.7)}};
    check_gradients(
        [](Graph& g, const Leaves& L) {
            return weighted_sum(g, g.global_avg_pool(g.input("x", L.at("x"), true)));
        },
        L);
}

TEST_CASE("reshape passes gradients through unchanged") {
    Leaves L{{"x", pat({2, 6}, 0.9, 0.2)}, {"m", pat({4, 2}, 0.6, 1.4)}};
    check_gradients(
        [](Graph& g, const Leaves& L) {
            Val x = g.input("x", L.at("x"), true);
            Val m = g.input("m", L.at("m"), true);
            return weighted_sum(g, g.matmul(g.reshape(x, {3, 4}), m));
        },
        L);
}

TEST_CASE("softmax cross entropy gradients match finite differences") {
    Tensor logits = pat({4, 5}, 1.5, 0.8);
    std::vector<int> labels{1, 0, 3, 2};
    SUBCASE("mean reduction") {
        check_gradients(
            [&](Graph& g, const Leaves& L) {
                return g.softmax_cross_entropy(g.input("z", L.at("z"), true), labels,
                                               Reduction::mean);
            },
            {{"z", logits}});
    }
    SUBCASE("sum reduction") {
        check_gradients(
            [&](Graph& g, const Leaves& L) {
                return g.softmax_cross_entropy(g.input("z", L.at("z"), true), labels,
                                               Reduction::sum);
            },
            {{"z", logits}});
    }
}

TEST_CASE("dense network end to end gradients match finite differences") {
    Leaves L{{"x", pat({2, 8}, 0.8, 0.3)},   {"w1", pat({8, 6}, 0.6, 1.0)},
             {"b1", pat({6}, 0.4, 2.2)},     {"w2", pat({6, 3}, 0.7, 0.5)},
             {"b2", pat({3}, 0.3, 1.8)}};
    std::vector<int> labels{2, 0};
    check_gradients(
        [&](Graph& g, const Leaves& L) {
            Val x = g.input("x", L.at("x"), true);
            Val h = g.relu(g.add(g.matmul(x, g.input("w1", L.at("w1"), true)),
                                 g.input("b1", L.at("b1"), true)));
            Val z = g.add(g.matmul(h, g.input("w2", L.at("w2"), true)),
                          g.input("b2", L.at("b2"), true));
            return g.softmax_cross_entropy(z, labels, Reduction::mean);
        },
        L);
}

TEST_CASE("conv network end to end gradients match finite differences") {
    Leaves L{{"x", pat({1, 2, 6, 6}, 0.9, 0.2)},
             {"w1", pat({4, 2, 3, 3}, 0.5, 1.3)},
             {"head", pat({4, 3}, 0.8, 0.9)},
             {"b", pat({3}, 0.4, 2.7)}};
    std::vector<int> labels{1};
    check_gradients(
        [&](Graph& g, const Leaves& L) {
            Val x = g.input("x", L.at("x"), true);
            Val c = g.relu(g.conv2d(x, g.input("w1", L.at("w1"), true), 2, 1));
            Val f = g.global_avg_pool(c);
            Val z = g.add(g.matmul(f, g.input("head", L.at("head"), true)),
                          g.input("b", L.at("b"), true));
            return g.softmax_cross_entropy(z, labels, Reduction::sum);
        },
        L);
}
