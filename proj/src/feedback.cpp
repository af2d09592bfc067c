#include "feedback.hpp"

#include <cmath>

namespace drf {

WeightKind weight_kind_from_string(const std::string& s) {
    if (s == "exponential") return WeightKind::exponential;
    if (s == "linear") return WeightKind::linear;
    if (s == "cosine") return WeightKind::cosine;
    throw ConfigError("drf.weight_kind: unknown value '" + s + "'");
}

DistanceKind distance_kind_from_string(const std::string& s) {
    if (s == "squared_l2_mean") return DistanceKind::squared_l2_mean;
    if (s == "l1_mean") return DistanceKind::l1_mean;
    throw ConfigError("drf.distance: unknown value '" + s + "'");
}

InversionMode inversion_mode_from_string(const std::string& s) {
    if (s == "ratio_matched") return InversionMode::ratio_matched;
    if (s == "marginal") return InversionMode::marginal;
    throw ConfigError("drf.inversion_mode: unknown value '" + s + "'");
}

std::string to_string(WeightKind k) {
    switch (k) {
        case WeightKind::exponential: return "exponential";
        case WeightKind::linear: return "linear";
        default: return "cosine";
    }
}
std::string to_string(DistanceKind k) {
    return k == DistanceKind::squared_l2_mean ? "squared_l2_mean" : "l1_mean";
}
std::string to_string(InversionMode m) {
    return m == InversionMode::ratio_matched ? "ratio_matched" : "marginal";
}

void DrfConfig::validate(int grid_steps) const {
    if (omega < 0.0) throw ConfigError("drf.omega must be >= 0");
    if (lambda < 0.0) throw ConfigError("drf.lambda must be >= 0");
    if (rho < 0.0) throw ConfigError("drf.rho must be >= 0");
    if (!(k > 0.0)) throw ConfigError("drf.k must be > 0");
    if (iterations < 1) throw ConfigError("drf.N must be >= 1");
    if (window_skip < 0) throw ConfigError("drf.window_skip must be >= 0");
    if (window_len < 0) throw ConfigError("drf.window_len must be >= 0");
    if (window_skip + window_len > grid_steps)
        throw ConfigError("drf.window_skip + drf.window_len exceeds sampler.steps (" +
                          std::to_string(window_skip) + "+" + std::to_string(window_len) + " > " +
                          std::to_string(grid_steps) + ")");
}

namespace {

// Inversion coefficients: z0_hat = (z - noise_coeff * eps_hat) / scale.
struct Inversion {
    double scale;        // sqrt(abar) or sqrt(r)
    double noise_coeff;  // sqrt(1-abar) or sqrt(1-r)
};

Inversion inversion_coeffs(int t, int t_prev, const NoiseSchedule& sched, InversionMode mode) {
    double base;
    if (mode == InversionMode::marginal) {
        base = sched.alpha_bar(t);
    } else {
        if (t_prev < 0) throw StateError("ratio_matched inversion requires t_prev");
        base = sched.step_ratio(t, t_prev);
    }
    const double scale = std::sqrt(base);
    if (!(scale > 0.0)) throw SingularityError("posterior_mean: zero inversion scale at t=" + std::to_string(t));
    return {scale, std::sqrt(1.0 - base)};
}

}  // namespace

Latent posterior_mean(const Latent& z_t, const Latent& eps_hat, int t, const NoiseSchedule& sched,
                      InversionMode mode, int t_prev) {
    require_same_shape(z_t, eps_hat, "posterior_mean");
    const Inversion inv = inversion_coeffs(t, t_prev, sched, mode);
    return lincomb(1.0 / inv.scale, z_t, -inv.noise_coeff / inv.scale, eps_hat);
}

Latent one_step_renoise(const Latent& z0_like, int t, int t_prev, const Latent& eps,
                        const NoiseSchedule& sched) {
    require_same_shape(z0_like, eps, "one_step_renoise");
    const double r = sched.step_ratio(t, t_prev);
    return lincomb(std::sqrt(r), z0_like, std::sqrt(1.0 - r), eps);
}

double distance(const Latent& a, const Latent& b, DistanceKind kind) {
    require_same_shape(a, b, "distance");
    double s = 0.0;
    if (kind == DistanceKind::squared_l2_mean) {
        for (int i = 0; i < a.size(); ++i) {
            const double d = a[i] - b[i];
            s += d * d;
        }
    } else {
        for (int i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    }
    return s / a.size();
}

Latent distance_grad(const Latent& a, const Latent& b, DistanceKind kind) {
    require_same_shape(a, b, "distance_grad");
    Latent g(a.channels, a.height, a.width);
    const double inv_n = 1.0 / a.size();
    if (kind == DistanceKind::squared_l2_mean) {
        for (int i = 0; i < a.size(); ++i) g[i] = 2.0 * inv_n * (a[i] - b[i]);
    } else {
        for (int i = 0; i < a.size(); ++i) {
            const double d = a[i] - b[i];
            g[i]           = d > 0.0 ? inv_n : (d < 0.0 ? -inv_n : 0.0);
        }
    }
    return g;
}

namespace {

// Shared by both feedback branches: the loss compares the posterior-mean
// inversion of a noisy latent against a fixed target, and the gradient flows
// back through the inversion, the (optional) model jacobian, and the
// re-noise map d z_noisy / d eps = sqrt(1-r) * I.
LossGrad inversion_loss(const Latent& target, const Latent& z_noisy, const ScoreModel& model,
                        const Condition& y, int t, int t_prev, const NoiseSchedule& sched,
                        const DrfConfig& cfg) {
    const Inversion inv  = inversion_coeffs(t, t_prev, sched, cfg.inversion_mode);
    const Latent eps_hat = cfg_predict(model, z_noisy, y, t, cfg.omega);
    const Latent post    = lincomb(1.0 / inv.scale, z_noisy, -inv.noise_coeff / inv.scale, eps_hat);

    LossGrad out;
    out.loss = distance(post, target, cfg.distance_kind);

    const Latent u   = distance_grad(post, target, cfg.distance_kind);
    const Latent jtu = cfg_vjp(model, z_noisy, y, t, cfg.omega, u, cfg.gradient_mode);
    // dL/d z_noisy = (u - noise_coeff * J^T u) / scale
    const Latent dz = lincomb(1.0 / inv.scale, u, -inv.noise_coeff / inv.scale, jtu);

    const double renoise_coeff = std::sqrt(1.0 - sched.step_ratio(t, t_prev));
    out.grad                   = scaled(dz, renoise_coeff);
    if (!all_finite(out.grad)) throw NumericError("non-finite feedback gradient at t=" + std::to_string(t));
    return out;
}

}  // namespace

LossGrad appearance_loss(const Latent& z0_a, const Latent& z_tilde_a, const ScoreModel& model,
                         const Condition& y_a, int t, int t_prev, const NoiseSchedule& sched,
                         const DrfConfig& cfg) {
    return inversion_loss(z0_a, z_tilde_a, model, y_a, t, t_prev, sched, cfg);
}

LossGrad generation_loss(const Latent& z_prev_g, const Latent& z_t_g, const ScoreModel& model,
                         const Condition& y_g, int t, int t_prev, const NoiseSchedule& sched,
                         const DrfConfig& cfg) {
    return inversion_loss(z_prev_g, z_t_g, model, y_g, t, t_prev, sched, cfg);
}

double iter_weight(int i, int n, double k, WeightKind kind) {
    if (n < 1) throw ConfigError("drf.N must be >= 1");
    if (i < 0 || i >= n) throw StateError("iteration index " + std::to_string(i) + " outside [0," +
                                          std::to_string(n - 1) + "]");
    if (n == 1) return 0.0;
    const double x = double(i) / double(n - 1);
    switch (kind) {
        case WeightKind::exponential:
            if (!(k > 0.0)) throw ConfigError("drf.k must be > 0");
            return std::sqrt(std::expm1(k * x) / std::expm1(k));
        case WeightKind::linear:
            return x;
        case WeightKind::cosine:
        default:
            return 0.5 * (1.0 - std::cos(M_PI * x));
    }
}

LossGrad drf_loss(const LossGrad& app, const LossGrad* gen, double w, double rho) {
    if (w > 0.0 && gen == nullptr)
        throw StateError("drf_loss: generation feedback required when its weight is positive");
    LossGrad out = app;
    const double c = rho * w;
    if (gen != nullptr && c != 0.0) {
        out.loss += c * gen->loss;
        axpy(c, gen->grad, out.grad);
    }
    return out;
}

Latent noise_update(const Latent& eps, const Latent& grad, double lambda) {
    require_same_shape(eps, grad, "noise_update");
    if (lambda < 0.0) throw ConfigError("drf.lambda must be >= 0");
    if (!all_finite(grad)) throw NumericError("noise_update: non-finite gradient");
    if (lambda == 0.0) return eps;
    return lincomb(1.0, eps, -lambda, grad);
}

DrfRefineResult drf_refine(const Latent& z_tm1_g, const Latent& z0_a, int t, int t_prev,
                           const ScoreModel& model, const Condition& y_a, const Condition& y_g,
                           const NoiseSchedule& sched, const DrfConfig& cfg, RngStream& rng) {
    require_same_shape(z_tm1_g, z0_a, "drf_refine");

    DrfState state;
    state.eps = gaussian_latent(z0_a.channels, z0_a.height, z0_a.width, rng);

    DrfRefineResult res;
    res.iters.reserve(size_t(cfg.iterations));

    const bool gen_active = cfg.rho > 0.0 && cfg.iterations > 1;

    for (int i = 0; i < cfg.iterations; ++i) {
        state.iteration = i;
        // Both branches share the same injection noise; that coupling is what
        // lets the appearance fixed point steer the generation latent.
        const Latent z_t_g     = one_step_renoise(z_tm1_g, t, t_prev, state.eps, sched);
        const Latent z_tilde_a = one_step_renoise(z0_a, t, t_prev, state.eps, sched);

        LossGrad app;
        try {
            app = appearance_loss(z0_a, z_tilde_a, model, y_a, t, t_prev, sched, cfg);
        } catch (const Error& e) {
            throw Error(e.code, "drf iteration " + std::to_string(i) + ": " + e.what());
        }

        const double w = iter_weight(i, cfg.iterations, cfg.k, cfg.weight_kind);

        // The generation posterior mean is needed every iteration (it becomes
        // the next fixed point) but its gradient only matters when weighted.
        const Latent eps_g = cfg_predict(model, z_t_g, y_g, t, cfg.omega);
        const Latent z0t_g =
            posterior_mean(z_t_g, eps_g, t, sched, cfg.inversion_mode, t_prev);

        std::optional<LossGrad> gen;
        if (i > 0 && w > 0.0 && gen_active) {
            try {
                gen = generation_loss(*state.z_prev_g, z_t_g, model, y_g, t, t_prev, sched, cfg);
            } catch (const Error& e) {
                throw Error(e.code, "drf iteration " + std::to_string(i) + ": " + e.what());
            }
        }

        const LossGrad total = drf_loss(app, gen ? &*gen : nullptr, gen ? w : 0.0, cfg.rho);
        // The feedback distances are mean-reduced, so their gradients carry a
        // 1/size factor; scaling the step by the latent size keeps the
        // configured lambda resolution-independent (and exact for scalars).
        state.eps      = noise_update(state.eps, total.grad, cfg.lambda * z0_a.size());
        state.z_prev_g = z0t_g;

        DrfIterRecord rec;
        rec.t         = t;
        rec.iteration = i;
        rec.loss_app  = app.loss;
        if (gen) rec.loss_gen = gen->loss;
        rec.weight    = w;
        rec.loss_drf  = total.loss;
        rec.eps_norm  = l2_norm(state.eps);
        rec.grad_norm = l2_norm(total.grad);
        res.iters.push_back(rec);
    }

    res.z_t_star = one_step_renoise(z_tm1_g, t, t_prev, state.eps, sched);
    return res;
}

double fpr_loss(const Latent& z_t, const Latent& z0_org, const ScoreModel& model,
                const Condition& y, int t, const NoiseSchedule& sched, const DrfConfig& cfg) {
    const Latent eps_hat = cfg_predict(model, z_t, y, t, cfg.omega);
    const Latent post    = posterior_mean(z_t, eps_hat, t, sched, InversionMode::marginal);
    return distance(post, z0_org, cfg.distance_kind);
}

Latent fpr_update(const Latent& z_t, const Latent& z0_org, const ScoreModel& model,
                  const Condition& y, int t, double lambda, const NoiseSchedule& sched,
                  const DrfConfig& cfg) {
    require_same_shape(z_t, z0_org, "fpr_update");
    if (lambda < 0.0) throw ConfigError("drf.lambda must be >= 0");
    if (lambda == 0.0) return z_t;

    const Inversion inv  = inversion_coeffs(t, -1, sched, InversionMode::marginal);
    const Latent eps_hat = cfg_predict(model, z_t, y, t, cfg.omega);
    const Latent post    = lincomb(1.0 / inv.scale, z_t, -inv.noise_coeff / inv.scale, eps_hat);
    const Latent u       = distance_grad(post, z0_org, cfg.distance_kind);
    const Latent jtu     = cfg_vjp(model, z_t, y, t, cfg.omega, u, cfg.gradient_mode);
    const Latent grad    = lincomb(1.0 / inv.scale, u, -inv.noise_coeff / inv.scale, jtu);
    if (!all_finite(grad)) throw NumericError("fpr_update: non-finite gradient");
    return lincomb(1.0, z_t, -lambda, grad);
}

ControlledStepFn drf_hook(ControlledStepFn inner, const DrfConfig& cfg, const Latent& z0_a,
                          const Condition& y_a, const Condition& y_g, const ScoreModel& model,
                          const NoiseSchedule& sched, RunTrace* trace) {
    return [inner = std::move(inner), &cfg, z0_a, y_a, y_g, &model, &sched, trace](
               const Latent& z_t, int step_index, int t, int t_prev, SamplerState& state,
               RngStream& rng) -> Latent {
        const bool active =
            step_index >= cfg.window_skip && step_index < cfg.window_skip + cfg.window_len;
        if (!active) return inner(z_t, step_index, t, t_prev, state, rng);

        // First pass produces z_{t-1}^g, refinement rebuilds the noisy latent
        // from the optimized injection noise, and the step re-runs from it.
        // The solver state is restored so exactly one step is accounted for.
        SamplerState before = state;
        const Latent z_tm1  = inner(z_t, step_index, t, t_prev, state, rng);

        DrfRefineResult refined = drf_refine(z_tm1, z0_a, t, t_prev, model, y_a, y_g, sched, cfg, rng);
        if (trace) {
            trace->drf_refine_calls += 1;
            for (auto& r : refined.iters) trace->drf_iters.push_back(r);
        }

        state = before;
        return inner(refined.z_t_star, step_index, t, t_prev, state, rng);
    };
}

}  // namespace drf
