#include "sampler.hpp"

#include <cmath>

namespace drf {

SamplerKind sampler_kind_from_string(const std::string& s) {
    if (s == "ddim") return SamplerKind::ddim;
    if (s == "dpm_solver_2s") return SamplerKind::dpm_solver_2s;
    if (s == "dpm_solver_pp_2m") return SamplerKind::dpm_solver_pp_2m;
    throw ConfigError("sampler.kind: unknown value '" + s + "'");
}

std::string to_string(SamplerKind k) {
    switch (k) {
        case SamplerKind::ddim: return "ddim";
        case SamplerKind::dpm_solver_2s: return "dpm_solver_2s";
        default: return "dpm_solver_pp_2m";
    }
}

namespace {

struct Coeff {
    double ab, alpha, sigma;
};

Coeff coeff_at(const NoiseSchedule& sched, int t) {
    const double ab = sched.alpha_bar(t);
    return {ab, std::sqrt(ab), std::sqrt(1.0 - ab)};
}

double log_snr(const Coeff& c) { return std::log(c.alpha / c.sigma); }

Latent data_prediction(const Latent& z, const Latent& eps_hat, const Coeff& c) {
    return lincomb(1.0 / c.alpha, z, -c.sigma / c.alpha, eps_hat);
}

// 1st-order DPM-Solver++ update (identical to DDIM eta=0 up to rounding).
// exp(-h) is formed from alpha/sigma ratios so the t_prev = 0 endpoint is
// regular: sigma_prev = 0 collapses the update onto the data prediction.
Latent dpm_first_order(const Latent& z, const Latent& z0, const Coeff& ct, const Coeff& cp) {
    const double exp_mh = (ct.alpha * cp.sigma) / (ct.sigma * cp.alpha);
    return lincomb(cp.sigma / ct.sigma, z, -cp.alpha * (exp_mh - 1.0), z0);
}

Latent ddim_step(double eta, const Latent& z_t, const Coeff& ct, const Coeff& cp,
                 const Latent& eps_hat, RngStream& rng) {
    const Latent z0 = data_prediction(z_t, eps_hat, ct);
    double sigma_dd = 0.0;
    if (eta > 0.0 && cp.sigma > 0.0) {
        sigma_dd = eta * std::sqrt((1.0 - cp.ab) / (1.0 - ct.ab)) * std::sqrt(1.0 - ct.ab / cp.ab);
    }
    const double dir = std::sqrt(std::max(1.0 - cp.ab - sigma_dd * sigma_dd, 0.0));
    Latent out       = lincomb(cp.alpha, z0, dir, eps_hat);
    if (sigma_dd > 0.0)
        for (auto& v : out.data) v += sigma_dd * rng.normal();
    return out;
}

}  // namespace

Latent sampler_step(SamplerKind kind, double eta, SamplerState& state, const Latent& z_t, int t,
                    int t_prev, const Latent& eps_hat, const NoiseSchedule& sched, RngStream& rng) {
    require_same_shape(z_t, eps_hat, "sampler_step");
    if (t < t_prev) throw ScheduleError("sampler_step: t must be > t_prev on the grid");
    if (!all_finite(eps_hat))
        throw NumericError("non-finite noise prediction at t=" + std::to_string(t));

    const Coeff ct = coeff_at(sched, t);
    const Coeff cp = coeff_at(sched, t_prev);

    switch (kind) {
        case SamplerKind::ddim:
            return ddim_step(eta, z_t, ct, cp, eps_hat, rng);

        case SamplerKind::dpm_solver_pp_2m: {
            const Latent z0 = data_prediction(z_t, eps_hat, ct);
            Latent out;
            if (!state.prev_z0 || t_prev == 0) {
                out = dpm_first_order(z_t, z0, ct, cp);
            } else {
                const Coeff cl      = coeff_at(sched, state.prev_t);
                const double h      = log_snr(cp) - log_snr(ct);
                const double h_last = log_snr(ct) - log_snr(cl);
                const double r      = h_last / h;
                const Latent d      = lincomb(1.0 + 1.0 / (2.0 * r), z0, -1.0 / (2.0 * r),
                                              *state.prev_z0);
                out                 = dpm_first_order(z_t, d, ct, cp);
            }
            state.prev_z0 = z0;
            state.prev_t  = t;
            return out;
        }

        case SamplerKind::dpm_solver_2s:
        default: {
            const Latent z0 = data_prediction(z_t, eps_hat, ct);
            if (t_prev == 0) {
                // Final transition: the 2nd-order correction is undefined at
                // infinite log-SNR, finish with the 1st-order update.
                state.pair_origin_z.reset();
                state.pair_origin_z0.reset();
                state.pair_origin_t = -1;
                return dpm_first_order(z_t, z0, ct, cp);
            }
            if (!state.pair_origin_z) {
                // First leg of a step pair: remember the origin, move to the
                // midpoint with the 1st-order update to evaluate the model there.
                state.pair_origin_z  = z_t;
                state.pair_origin_z0 = z0;
                state.pair_origin_t  = t;
                return dpm_first_order(z_t, z0, ct, cp);
            }
            const Coeff c1      = coeff_at(sched, state.pair_origin_t);
            const double h      = log_snr(cp) - log_snr(c1);
            const double h0     = log_snr(ct) - log_snr(c1);
            const double r0     = h0 / h;
            const double exp_mh = (c1.alpha * cp.sigma) / (c1.sigma * cp.alpha);
            const Latent d1     = lincomb(1.0 / r0, z0, -1.0 / r0, *state.pair_origin_z0);
            Latent out          = lincomb(cp.sigma / c1.sigma, *state.pair_origin_z,
                                          -cp.alpha * (exp_mh - 1.0), *state.pair_origin_z0);
            axpy(-0.5 * cp.alpha * (exp_mh - 1.0), d1, out);
            state.pair_origin_z.reset();
            state.pair_origin_z0.reset();
            state.pair_origin_t = -1;
            return out;
        }
    }
}

Latent sample(const SampleParams& params, const ScoreModel& model, const Condition& y,
              const StepGrid& grid, const NoiseSchedule& sched, int channels, int height, int width,
              uint64_t seed, const StepHook& hook, RunTrace* trace) {
    RngStream rng(seed);
    Latent z = gaussian_latent(channels, height, width, rng);
    SamplerState state;
    if (trace) trace->seed = seed;

    for (int i = 0; i < grid.steps(); ++i) {
        const int t      = grid.at(i);
        const int t_prev = grid.prev(i);
        Latent eps_hat   = cfg_predict(model, z, y, t, params.omega);
        if (hook) {
            try {
                hook(i, t, t_prev, z, eps_hat);
            } catch (const Error& e) {
                throw Error(e.code, "step " + std::to_string(i) + " (t=" + std::to_string(t) +
                                        "): " + e.what());
            }
        }
        if (trace) trace->record_step(i, t, t_prev, z, eps_hat);
        z = sampler_step(params.kind, params.eta, state, z, t, t_prev, eps_hat, sched, rng);
        if (!all_finite(z))
            throw NumericError("non-finite latent after step " + std::to_string(i) +
                               " (t=" + std::to_string(t) + ")");
    }
    return z;
}

}  // namespace drf
