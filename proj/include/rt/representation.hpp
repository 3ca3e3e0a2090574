#pragma once

#include "rt/attacks.hpp"
#include "rt/dataset.hpp"

namespace rt {

struct VizRequest {
    int node = 0;  // index into the representation vector
    int steps = 100;
    double step_size = 0.1;
    double eps = 0;  // > 0 constrains iterates to an l2 ball around the seed
};

struct VizResult {
    Tensor image;           // best iterate, pixels in [0,1]
    double activation = 0;  // at the best iterate
    std::vector<double> trace;  // activation per iterate, index 0 = seed
};

// Gradient ascent on one node of the representation, normalized steps,
// iterates clamped to [0,1] (and projected into the eps-ball around the
// seed when given). Returns the best iterate seen, so the result never
// activates less than the seed.
VizResult feature_viz(const Model& m, const Tensor& seed, const VizRequest& req);

struct InterpRequest {
    double lambda = 0.5;
    int steps = 200;
    double step_size = 0.05;
    // target lambda*f(x1) - (1-lambda)*f(x2) instead of the convex blend
    bool difference_target = false;
};

struct InterpResult {
    Tensor image;
    double distance = 0;        // representation residual norm at the result
    std::vector<double> trace;  // residual norm per iterate
};

// Seeks an image whose representation matches the blend
// lambda*f(x1) + (1-lambda)*f(x2), starting from the pixel blend and
// descending the squared residual with normalized steps. Best iterate wins.
InterpResult interpolate(const Model& m, const Tensor& x1, const Tensor& x2,
                         const InterpRequest& req);

struct TargetedResult {
    Tensor image;  // x + delta
    Tensor delta;
    double loss = 0;  // target-class loss at the result
    bool success = false;
    std::vector<double> trace;  // target-class loss per iterate (first restart)
};

// Drives the input toward a chosen class under a (typically huge) budget.
// The spec's targeted flag is set from target_class; everything else (norm,
// eps, steps, step size, seed) comes from spec as given.
TargetedResult targeted_perturbation(const Model& m, const Tensor& x, int target_class,
                                     PerturbationSpec spec);

struct SmoothnessStats {
    std::vector<double> ratios;  // one per probe
    double mean = 0;
    double median = 0;
    double p90 = 0;
    double max = 0;
};

// Local expansion of the representation map: for each probe, picks a
// dataset sample x and a direction d of length probe_eps (uniform on the
// sphere), and measures ||f(x+d) - f(x)|| / ||(x+d) - x||. The probe point
// x+d may leave [0,1]; the raw map is what is being measured. The
// denominator is the realized distance, so an identity representation
// scores exactly 1.
SmoothnessStats representation_smoothness(const Model& m, const Dataset& d, double probe_eps,
                                          int probes, uint64_t seed);

}  // namespace rt
