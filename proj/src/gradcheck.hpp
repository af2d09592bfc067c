#pragma once

#include <string>

#include "config.hpp"

namespace drf {

struct GradCheckResult {
    double max_rel_err = 0.0;
    int instances      = 0;
    std::string worst;  // description of the worst instance
    bool passed        = false;
};

/*
 * Finite-difference validation of the feedback gradient with respect to the
 * injection noise, over randomized analytic-mixture instances (1-8 dim
 * latents, both feedback terms active). full_vjp is checked against central
 * differences of the true loss; identity_jacobian against differences of its
 * own linearized surrogate, a consistency rather than truth check.
 */
GradCheckResult run_gradcheck(const ResolvedConfig& cfg);

// Single-mode sweep against a caller-supplied model; used by the suite above
// and by tests that inject broken vjp implementations.
GradCheckResult gradcheck_sweep(const ScoreModel& model, const Condition& y_a,
                                const Condition& y_g, const NoiseSchedule& sched,
                                const DrfConfig& cfg, int instances, uint64_t seed, int dim_min,
                                int dim_max, double tolerance);

}  // namespace drf
