#include "gradcheck.hpp"

#include <cmath>
#include <cstdio>

namespace drf {

namespace {

struct Instance {
    Latent eps, z_tm1_g, z0_a, z_prev_g;
    int t, t_prev;
    double w;
};

Instance make_instance(int dim, const NoiseSchedule& sched, const DrfConfig& cfg, RngStream& rng) {
    Instance in;
    in.eps      = gaussian_latent(1, 1, dim, rng);
    in.z_tm1_g  = gaussian_latent(1, 1, dim, rng);
    in.z0_a     = gaussian_latent(1, 1, dim, rng);
    in.z_prev_g = gaussian_latent(1, 1, dim, rng);
    const int t_max = sched.t_train() - 1;
    in.t      = 50 + int(rng.next_u64() % uint64_t(t_max - 100));
    in.t_prev = in.t - 5 - int(rng.next_u64() % 36);
    if (in.t_prev < 0) in.t_prev = 0;
    in.w = iter_weight(1, std::max(cfg.iterations, 2), cfg.k, cfg.weight_kind);
    return in;
}

// Combined feedback loss as a pure function of the injection noise.
double loss_at(const Instance& in, const Latent& eps, const ScoreModel& model, const Condition& y_a,
               const Condition& y_g, const NoiseSchedule& sched, const DrfConfig& cfg) {
    const Latent z_til = one_step_renoise(in.z0_a, in.t, in.t_prev, eps, sched);
    const Latent z_t_g = one_step_renoise(in.z_tm1_g, in.t, in.t_prev, eps, sched);

    const double base = cfg.inversion_mode == InversionMode::marginal
                            ? sched.alpha_bar(in.t)
                            : sched.step_ratio(in.t, in.t_prev);
    const double a = std::sqrt(base);
    const double c = std::sqrt(1.0 - base);

    const Latent ea  = cfg_predict(model, z_til, y_a, in.t, cfg.omega);
    const Latent pa  = lincomb(1.0 / a, z_til, -c / a, ea);
    const Latent eg  = cfg_predict(model, z_t_g, y_g, in.t, cfg.omega);
    const Latent pg  = lincomb(1.0 / a, z_t_g, -c / a, eg);

    return distance(pa, in.z0_a, cfg.distance_kind) +
           cfg.rho * in.w * distance(pg, in.z_prev_g, cfg.distance_kind);
}

// Same forward, but the model outputs are linearized around the base point
// with an identity jacobian: eps_hat(z) := eps_hat(z0) + (z - z0). Finite
// differences of this surrogate are what the identity_jacobian gradient
// claims to be.
double surrogate_loss_at(const Instance& in, const Latent& eps, const ScoreModel& model,
                         const Condition& y_a, const Condition& y_g, const NoiseSchedule& sched,
                         const DrfConfig& cfg) {
    const Latent z_til0 = one_step_renoise(in.z0_a, in.t, in.t_prev, in.eps, sched);
    const Latent z_t_g0 = one_step_renoise(in.z_tm1_g, in.t, in.t_prev, in.eps, sched);
    const Latent ea0    = cfg_predict(model, z_til0, y_a, in.t, cfg.omega);
    const Latent eg0    = cfg_predict(model, z_t_g0, y_g, in.t, cfg.omega);

    const Latent z_til = one_step_renoise(in.z0_a, in.t, in.t_prev, eps, sched);
    const Latent z_t_g = one_step_renoise(in.z_tm1_g, in.t, in.t_prev, eps, sched);

    const double base = cfg.inversion_mode == InversionMode::marginal
                            ? sched.alpha_bar(in.t)
                            : sched.step_ratio(in.t, in.t_prev);
    const double a = std::sqrt(base);
    const double c = std::sqrt(1.0 - base);

    Latent ea = lincomb(1.0, ea0, 1.0, z_til);
    axpy(-1.0, z_til0, ea);
    Latent eg = lincomb(1.0, eg0, 1.0, z_t_g);
    axpy(-1.0, z_t_g0, eg);

    const Latent pa = lincomb(1.0 / a, z_til, -c / a, ea);
    const Latent pg = lincomb(1.0 / a, z_t_g, -c / a, eg);

    return distance(pa, in.z0_a, cfg.distance_kind) +
           cfg.rho * in.w * distance(pg, in.z_prev_g, cfg.distance_kind);
}

}  // namespace

GradCheckResult gradcheck_sweep(const ScoreModel& model, const Condition& y_a,
                                const Condition& y_g, const NoiseSchedule& sched,
                                const DrfConfig& cfg, int instances, uint64_t seed, int dim_min,
                                int dim_max, double tolerance) {
    GradCheckResult res;
    res.instances = instances;
    RngStream rng(seed);

    for (int n = 0; n < instances; ++n) {
        const int dim     = dim_min + n % (dim_max - dim_min + 1);
        const Instance in = make_instance(dim, sched, cfg, rng);

        // Analytic gradient via the production loss path.
        const Latent z_til = one_step_renoise(in.z0_a, in.t, in.t_prev, in.eps, sched);
        const Latent z_t_g = one_step_renoise(in.z_tm1_g, in.t, in.t_prev, in.eps, sched);
        const LossGrad app = appearance_loss(in.z0_a, z_til, model, y_a, in.t, in.t_prev, sched, cfg);
        const LossGrad gen =
            generation_loss(in.z_prev_g, z_t_g, model, y_g, in.t, in.t_prev, sched, cfg);
        const LossGrad total = drf_loss(app, &gen, in.w, cfg.rho);

        // Central finite differences of the mode's own forward.
        const bool identity = cfg.gradient_mode == GradientMode::identity_jacobian;
        Latent fd(1, 1, dim);
        Latent eps = in.eps;
        for (int j = 0; j < dim; ++j) {
            const double h = 1e-5 * (1.0 + std::abs(in.eps[j]));
            eps[j]         = in.eps[j] + h;
            const double lp = identity ? surrogate_loss_at(in, eps, model, y_a, y_g, sched, cfg)
                                       : loss_at(in, eps, model, y_a, y_g, sched, cfg);
            eps[j]          = in.eps[j] - h;
            const double lm = identity ? surrogate_loss_at(in, eps, model, y_a, y_g, sched, cfg)
                                       : loss_at(in, eps, model, y_a, y_g, sched, cfg);
            eps[j] = in.eps[j];
            fd[j]  = (lp - lm) / (2.0 * h);
        }

        Latent diff = total.grad;
        axpy(-1.0, fd, diff);
        const double rel = l2_norm(diff) / std::max(l2_norm(fd), 1e-12);
        if (rel > res.max_rel_err) {
            res.max_rel_err = rel;
            char buf[160];
            std::snprintf(buf, sizeof(buf),
                          "instance %d: dim=%d t=%d t_prev=%d mode=%s rel_err=%.3e", n, dim, in.t,
                          in.t_prev, to_string(cfg.gradient_mode).c_str(), rel);
            res.worst = buf;
        }
    }
    res.passed = res.max_rel_err < tolerance;
    return res;
}

GradCheckResult run_gradcheck(const ResolvedConfig& cfg) {
    const NoiseSchedule sched = cfg.make_noise_schedule();
    RngStream rng(cfg.gradcheck.seed);

    GradCheckResult overall;
    overall.passed = true;

    // Both gradient modes over a spread of mixture sizes; each mode is
    // checked against its own oracle.
    for (GradientMode mode : {GradientMode::full_vjp, GradientMode::identity_jacobian}) {
        for (int k_components = 1; k_components <= 3; ++k_components) {
            const int dim = 1 + int(rng.next_u64() % 8);
            std::vector<Latent> means;
            for (int k = 0; k < k_components; ++k) {
                Latent mu = gaussian_latent(1, 1, dim, rng);
                means.push_back(scaled(mu, 0.8));
            }
            std::map<int, std::vector<int>> labels;
            labels[0] = {0};
            labels[1] = {k_components - 1};
            GaussianMixtureScore model(means, labels, sched);

            DrfConfig dc     = cfg.drf;
            dc.gradient_mode = mode;
            // 2 modes x 3 mixture sizes, rounded up so the configured total is met.
            const int per_cell = std::max(1, (cfg.gradcheck.instances + 5) / 6);

            const GradCheckResult r = gradcheck_sweep(
                model, Condition::of(0), Condition::of(1), sched, dc, per_cell,
                rng.next_u64(), dim, dim, cfg.gradcheck.tolerance);
            overall.instances += r.instances;
            if (r.max_rel_err > overall.max_rel_err) {
                overall.max_rel_err = r.max_rel_err;
                overall.worst       = r.worst;
            }
            overall.passed = overall.passed && r.passed;
        }
    }
    return overall;
}

}  // namespace drf
