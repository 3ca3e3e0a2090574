#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rt/model.hpp"
#include "rt/tensor.hpp"

namespace rt {

enum class Norm { l2, linf };

std::string norm_name(Norm n);
Norm parse_norm(const std::string& s);

struct PerturbationSpec {
    Norm norm = Norm::l2;
    double eps = 0.0;
    double step_size = 0.0;  // <= 0 selects the default rule
    int steps = 0;
    bool rand_init = false;
    int restarts = 1;
    int targeted = -1;  // >= 0 descends toward this class
    uint64_t rng_seed = 0;

    bool is_targeted() const { return targeted >= 0; }
    // 1.5*eps for single-step attacks, 2.5*eps/steps otherwise
    double resolved_step() const;
    void validate() const;

    bool operator==(const PerturbationSpec&) const = default;
};

struct AttackResult {
    Tensor delta;  // same shape as x; x + delta is in [0,1] exactly
    double loss;   // cross entropy at x+delta (toward the target when targeted)
    bool success;  // untargeted: prediction != label; targeted: prediction == target
};

// Uniform over the cube [-eps, eps]^d.
Tensor sample_linf(const std::vector<int>& shape, double eps, Rng& rng);
// Uniform over the solid l2 ball of radius eps: Gaussian direction scaled
// by eps * u^(1/d). Expected norm is eps * d/(d+1).
Tensor sample_l2_ball(const std::vector<int>& shape, double eps, Rng& rng);

// Projection onto the norm ball (no-op when already inside).
Tensor project(Tensor delta, Norm norm, double eps);
// Shrinks delta coordinatewise so x + delta lies in [0,1] *exactly* in the
// build's floating point type. Requires x itself in [0,1].
Tensor clamp_to_domain(Tensor delta, const Tensor& x);

// Receives per-sample losses at each iterate: step -1 is the initial point,
// step k >= 0 the iterate after step k. Used for loss traces.
struct StepObserver {
    virtual ~StepObserver() = default;
    virtual void on_step(int restart, int step, const std::vector<double>& losses) = 0;
};

// Projected gradient attack over a batch (dim 0 indexes samples; a single
// sample without batch dim is accepted). Every sample runs independently:
// sample i derives all of its randomness from sample_seeds[i] (restart r
// uses mix(sample_seeds[i], r)), and batching is a pure parallelization.
// Each step ascends (descends when targeted), projects onto the norm ball
// and clamps to the pixel domain; with restarts > 1 the restart with the
// highest loss wins (lowest, when targeted).
std::vector<AttackResult> attack_batch(const Model& m, const Tensor& X, const std::vector<int>& y,
                                       const PerturbationSpec& spec,
                                       const std::vector<uint64_t>& sample_seeds,
                                       StepObserver* observer = nullptr);

// The batch with each row replaced by its adversarial counterpart.
Tensor perturb_batch(const Model& m, const Tensor& X, const std::vector<int>& y,
                     const PerturbationSpec& spec, const std::vector<uint64_t>& sample_seeds);

// Single-sample front ends. Seeds are derived as mix(spec.rng_seed, 0), so
// these match attack_batch on a one-sample batch bitwise.
AttackResult pgd(const Model& m, const Tensor& x, int y, const PerturbationSpec& spec);
// One signed step of size eps, then domain clamp. Equal to pgd with
// {linf, steps = 1, step_size = eps, no random init}.
AttackResult fgsm(const Model& m, const Tensor& x, int y, double eps);
// Single-step l2 attack with random-ball init; alpha <= 0 selects 1.5*eps.
// Equal to pgd with {l2, steps = 1, rand_init = true}.
AttackResult fast_l2(const Model& m, const Tensor& x, int y, double eps, double alpha,
                     uint64_t seed);

}  // namespace rt
