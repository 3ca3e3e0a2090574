#pragma once

#include <string>
#include <vector>

#include "rt/attacks.hpp"
#include "rt/dataset.hpp"

namespace rt {

struct EvalResult {
    int n = 0;
    double clean_acc = 0;
    double mean_clean_loss = 0;
    double adv_acc = -1;  // -1 when no attack was requested
};

// Clean accuracy plus, when spec is non-null, adversarial accuracy under
// that attack. Sample i derives its attack randomness from
// mix(spec->rng_seed, i) (i = dataset index), so results do not depend on
// evaluation batching. A sample the model misclassifies clean is counted
// adversarially wrong without running the attack.
EvalResult evaluate(const Model& m, const Dataset& d, const PerturbationSpec* spec,
                    int chunk = 128);

double adversarial_accuracy(const Model& m, const Dataset& d, const PerturbationSpec& spec);

struct SweepPoint {
    double eps = 0;
    double adv_acc = 0;
    double clean_acc = 0;
    int steps = 0;
    int restarts = 0;
    uint64_t seed = 0;
};

// Robustness curve: runs the base attack at each eps with step size
// 2.5*eps/steps. Point i uses seed mix(base.rng_seed, i), so every
// (eps, sample, restart) triple draws from its own stream.
std::vector<SweepPoint> eps_sweep(const Model& m, const Dataset& d, const PerturbationSpec& base,
                                  const std::vector<double>& eps_values);

// Columns: eps,adv_acc,clean_acc,steps,restarts,seed
void write_curve_csv(const std::vector<SweepPoint>& curve, const std::string& path);

}  // namespace rt
