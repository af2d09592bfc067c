#pragma once

#include <functional>
#include <optional>
#include <string>

#include "score.hpp"
#include "trace.hpp"

namespace drf {

enum class SamplerKind { ddim, dpm_solver_2s, dpm_solver_pp_2m };

SamplerKind sampler_kind_from_string(const std::string& s);
std::string to_string(SamplerKind k);

/*
 * Per-run solver state. The 2nd-order kinds keep at most one previous model
 * output (data prediction); the singlestep solver additionally remembers the
 * origin sample of the step pair it is completing.
 */
struct SamplerState {
    std::optional<Latent> prev_z0;  // multistep: data prediction of the previous step
    int prev_t = -1;

    std::optional<Latent> pair_origin_z;   // singlestep: sample at the pair start
    std::optional<Latent> pair_origin_z0;  // singlestep: data prediction at the pair start
    int pair_origin_t = -1;

    void clear() {
        prev_z0.reset();
        prev_t = -1;
        pair_origin_z.reset();
        pair_origin_z0.reset();
        pair_origin_t = -1;
    }
};

/*
 * One reverse transition t -> t_prev given the noise prediction at (z_t, t).
 *
 * ddim (eta = 0): z_prev = sqrt(abar_prev) * z0_hat + sqrt(1 - abar_prev) * eps_hat,
 * with z0_hat the posterior-mean inversion of z_t. eta > 0 adds the DDIM
 * stochastic term. The DPM-Solver kinds apply their 2nd-order updates in
 * log-SNR coordinates with the data-prediction parameterization; both drop
 * to 1st order on the transition into t = 0, where the multistep correction
 * is undefined.
 */
Latent sampler_step(SamplerKind kind, double eta, SamplerState& state, const Latent& z_t, int t,
                    int t_prev, const Latent& eps_hat, const NoiseSchedule& sched, RngStream& rng);

// Hook invoked between denoise and advance; it may replace the latent and the
// noise prediction for the remaining part of the step.
using StepHook = std::function<void(int index, int t, int t_prev, Latent& z_t, Latent& eps_hat)>;

struct SampleParams {
    SamplerKind kind = SamplerKind::ddim;
    double eta       = 0.0;
    double omega     = 5.0;
};

// Full reverse run from seeded standard-normal noise over the grid, with
// classifier-free guided predictions. Aborts with step context on numeric
// failure.
Latent sample(const SampleParams& params, const ScoreModel& model, const Condition& y,
              const StepGrid& grid, const NoiseSchedule& sched, int channels, int height, int width,
              uint64_t seed, const StepHook& hook = nullptr, RunTrace* trace = nullptr);

}  // namespace drf
