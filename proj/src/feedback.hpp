#pragma once

#include <functional>
#include <optional>
#include <string>

#include "sampler.hpp"
#include "score.hpp"
#include "trace.hpp"

namespace drf {

enum class WeightKind { exponential, linear, cosine };
enum class DistanceKind { squared_l2_mean, l1_mean };
enum class InversionMode { ratio_matched, marginal };

WeightKind weight_kind_from_string(const std::string& s);
DistanceKind distance_kind_from_string(const std::string& s);
InversionMode inversion_mode_from_string(const std::string& s);
std::string to_string(WeightKind k);
std::string to_string(DistanceKind k);
std::string to_string(InversionMode m);

/*
 * Guidance hyper-parameters for the dual recursive feedback loop. The loop
 * optimizes a shared injection noise so that (a) the re-noised appearance
 * latent inverts back to the clean appearance reference and (b) the
 * generation branch stays aligned with its previous posterior mean.
 */
struct DrfConfig {
    double omega  = 2.0;   // classifier-free guidance scale
    double lambda = 0.25;  // noise-update step size, per unit of mean-reduced loss
    double rho    = 0.001; // generation-feedback balance
    double k      = 5.0;   // exponential weight sharpness
    int iterations = 3;    // N, recursive iterations per active step
    int window_skip = 5;   // steps before activation
    int window_len  = 20;  // active steps
    WeightKind weight_kind     = WeightKind::exponential;
    DistanceKind distance_kind = DistanceKind::squared_l2_mean;
    GradientMode gradient_mode = GradientMode::full_vjp;
    InversionMode inversion_mode = InversionMode::ratio_matched;

    void validate(int grid_steps) const;
};

struct DrfState {
    Latent eps;
    std::optional<Latent> z_prev_g;
    int iteration = 0;
};

/*
 * Posterior-mean inversion of a noisy latent given a noise prediction.
 * marginal mode divides out the full alpha_bar at t; ratio_matched replaces
 * it with the one-step ratio abar_t / abar_{t_prev}, which makes the
 * inversion exact for latents produced by one_step_renoise.
 */
Latent posterior_mean(const Latent& z_t, const Latent& eps_hat, int t, const NoiseSchedule& sched,
                      InversionMode mode, int t_prev = -1);

// sqrt(r) * z0_like + sqrt(1 - r) * eps with r = abar_t / abar_{t_prev}.
// Applied to both the clean appearance latent and the previous generation
// latent, with one shared eps.
Latent one_step_renoise(const Latent& z0_like, int t, int t_prev, const Latent& eps,
                        const NoiseSchedule& sched);

double distance(const Latent& a, const Latent& b, DistanceKind kind);
Latent distance_grad(const Latent& a, const Latent& b, DistanceKind kind);  // d dist / d a

struct LossGrad {
    double loss = 0.0;
    Latent grad;  // with respect to the injection noise
};

// d(posterior_mean(z_tilde_a), z0_a) plus its gradient through the re-noise
// map and the configured inversion; z_tilde_a must come from one_step_renoise
// of z0_a with the state's eps.
LossGrad appearance_loss(const Latent& z0_a, const Latent& z_tilde_a, const ScoreModel& model,
                         const Condition& y_a, int t, int t_prev, const NoiseSchedule& sched,
                         const DrfConfig& cfg);

// d(posterior_mean(z_t_g), z_prev_g); z_prev_g is a constant in the gradient.
LossGrad generation_loss(const Latent& z_prev_g, const Latent& z_t_g, const ScoreModel& model,
                         const Condition& y_g, int t, int t_prev, const NoiseSchedule& sched,
                         const DrfConfig& cfg);

// Iteration weight in [0,1]; w(0) = 0 and w(N-1) = 1 exactly. N = 1 returns 0.
double iter_weight(int i, int n, double k, WeightKind kind);

// L = L_app + rho * w * L_gen; gen may be null only when w = 0.
LossGrad drf_loss(const LossGrad& app, const LossGrad* gen, double w, double rho);

Latent noise_update(const Latent& eps, const Latent& grad, double lambda);

struct DrfRefineResult {
    Latent z_t_star;
    std::vector<DrfIterRecord> iters;
};

/*
 * The recursive refinement applied at one active step: draw an injection
 * noise, then for N iterations re-noise both branches with it, measure the
 * appearance and generation feedback losses, and descend on the noise.
 * Returns the re-noised generation latent built from the final noise.
 */
DrfRefineResult drf_refine(const Latent& z_tm1_g, const Latent& z0_a, int t, int t_prev,
                           const ScoreModel& model, const Condition& y_a, const Condition& y_g,
                           const NoiseSchedule& sched, const DrfConfig& cfg, RngStream& rng);

// Fixed-point regularization baseline: one gradient step on the current
// latent pulling its posterior mean (marginal inversion) back to a reference.
double fpr_loss(const Latent& z_t, const Latent& z0_org, const ScoreModel& model,
                const Condition& y, int t, const NoiseSchedule& sched, const DrfConfig& cfg);
Latent fpr_update(const Latent& z_t, const Latent& z0_org, const ScoreModel& model,
                  const Condition& y, int t, double lambda, const NoiseSchedule& sched,
                  const DrfConfig& cfg);

// A controlled denoise step: the pipeline's unit of work that DRF wraps.
using ControlledStepFn =
    std::function<Latent(const Latent& z_t, int step_index, int t, int t_prev, SamplerState& state,
                         RngStream& rng)>;

/*
 * Wraps a controlled step with the refinement loop. On steps inside the
 * window the inner step runs once, the refinement rebuilds the noisy latent
 * from the optimized injection noise, and the inner step re-runs from it
 * (one re-denoise per active step, solver state restored in between).
 * Steps outside the window pass through untouched.
 */
ControlledStepFn drf_hook(ControlledStepFn inner, const DrfConfig& cfg, const Latent& z0_a,
                          const Condition& y_a, const Condition& y_g, const ScoreModel& model,
                          const NoiseSchedule& sched, RunTrace* trace);

}  // namespace drf
