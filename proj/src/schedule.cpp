#include "schedule.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace drf {

namespace {

void validate_alpha_bars(const std::vector<double>& ab) {
    if (ab.size() < 2) throw ScheduleError("schedule needs at least one training step");
    if (ab[0] != 1.0) throw ScheduleError("alpha_bar[0] must be 1");
    for (size_t t = 1; t < ab.size(); ++t) {
        if (!(ab[t] > 0.0 && ab[t] <= 1.0))
            throw ScheduleError("alpha_bar[" + std::to_string(t) + "] outside (0,1]");
        if (!(ab[t] < ab[t - 1]))
            throw ScheduleError("alpha_bar not strictly decreasing at t=" + std::to_string(t));
    }
}

}  // namespace

double NoiseSchedule::step_ratio(int t, int t_prev) const {
    const double r = alpha_bar(t) / alpha_bar(t_prev);
    if (!(r > 0.0 && r <= 1.0))
        throw ScheduleError("alpha_bar ratio " + std::to_string(r) + " outside (0,1] for step " +
                            std::to_string(t) + " -> " + std::to_string(t_prev));
    return r;
}

NoiseSchedule make_schedule(ScheduleKind kind, int t_train, double beta_min, double beta_max) {
    if (t_train < 2) throw ConfigError("schedule.t_train must be >= 2");

    NoiseSchedule s;
    s.kind = kind;
    s.betas.resize(size_t(t_train));
    s.alpha_bars.resize(size_t(t_train) + 1);
    s.alpha_bars[0] = 1.0;

    if (kind == ScheduleKind::linear) {
        if (!(beta_min > 0.0)) throw ConfigError("schedule.beta_min must be > 0");
        if (!(beta_min <= beta_max)) throw ConfigError("schedule.beta_min must be <= schedule.beta_max");
        if (!(beta_max < 1.0)) throw ConfigError("schedule.beta_max must be < 1");
        for (int i = 0; i < t_train; ++i) {
            const double frac = t_train > 1 ? double(i) / double(t_train - 1) : 0.0;
            s.betas[size_t(i)] = beta_min + (beta_max - beta_min) * frac;
            s.alpha_bars[size_t(i) + 1] = s.alpha_bars[size_t(i)] * (1.0 - s.betas[size_t(i)]);
        }
    } else {
        // Squared-cosine profile; beta bounds are ignored. Betas are derived
        // from the profile (clipped at 0.999) and alpha_bars recomputed from
        // them so the cumulative-product identity is exact.
        const double offs = 0.008;
        auto f = [&](double t) {
            const double x = (t / t_train + offs) / (1.0 + offs) * M_PI / 2.0;
            const double c = std::cos(x);
            return c * c;
        };
        const double f0 = f(0.0);
        double prev     = 1.0;
        for (int i = 0; i < t_train; ++i) {
            const double target = f(double(i + 1)) / f0;
            double beta         = 1.0 - target / prev;
            beta                = std::min(beta, 0.999);
            s.betas[size_t(i)]  = beta;
            prev *= (1.0 - beta);
            s.alpha_bars[size_t(i) + 1] = prev;
        }
    }

    validate_alpha_bars(s.alpha_bars);
    return s;
}

NoiseSchedule schedule_from_alpha_bars(std::vector<double> alpha_bars) {
    validate_alpha_bars(alpha_bars);
    NoiseSchedule s;
    s.alpha_bars = std::move(alpha_bars);
    s.betas.resize(s.alpha_bars.size() - 1);
    for (size_t i = 0; i + 1 < s.alpha_bars.size(); ++i)
        s.betas[i] = 1.0 - s.alpha_bars[i + 1] / s.alpha_bars[i];
    return s;
}

Latent forward_diffuse(const Latent& z0, int t, const Latent& eps, const NoiseSchedule& sched) {
    require_same_shape(z0, eps, "forward_diffuse");
    const double ab = sched.alpha_bar(t);
    return lincomb(std::sqrt(ab), z0, std::sqrt(1.0 - ab), eps);
}

StepGrid make_step_grid(const NoiseSchedule& sched, int steps, GridSpacing spacing) {
    const int t_train = sched.t_train();
    if (steps < 1 || steps > t_train)
        throw ConfigError("sampler.steps must be in [1," + std::to_string(t_train) + "], got " +
                          std::to_string(steps));

    std::vector<int> ts(static_cast<size_t>(steps));
    if (spacing == GridSpacing::uniform) {
        // Constant integer gap anchored at the largest timestep.
        const int gap = t_train / steps;
        for (int i = 0; i < steps; ++i) ts[size_t(i)] = t_train - 1 - i * gap;
    } else {
        // Fractional accumulation from the top, as fast ODE solvers prefer.
        const double step = double(t_train) / steps;
        for (int i = 0; i < steps; ++i) ts[size_t(i)] = int(std::lround(t_train - i * step)) - 1;
    }
    return step_grid_from_timesteps(sched, std::move(ts));
}

StepGrid step_grid_from_timesteps(const NoiseSchedule& sched, std::vector<int> timesteps) {
    if (timesteps.empty()) throw ConfigError("step grid must not be empty");
    for (size_t i = 0; i < timesteps.size(); ++i) {
        if (timesteps[i] < 0 || timesteps[i] >= sched.t_train())
            throw ConfigError("grid timestep " + std::to_string(timesteps[i]) + " outside [0," +
                              std::to_string(sched.t_train() - 1) + "]");
        if (i > 0) {
            if (!(timesteps[i] < timesteps[i - 1]))
                throw ConfigError("grid timesteps must be strictly descending");
            const double r = sched.alpha_bar(timesteps[i - 1]) / sched.alpha_bar(timesteps[i]);
            if (!(r > 0.0 && r < 1.0))
                throw ScheduleError("adjacent grid alpha_bar ratio outside (0,1)");
        }
    }
    StepGrid g;
    g.timesteps = std::move(timesteps);
    return g;
}

void dump_schedule_csv(const NoiseSchedule& sched, std::ostream& os) {
    os << "t,beta,alpha_bar\n";
    char buf[96];
    for (size_t t = 0; t < sched.alpha_bars.size(); ++t) {
        const double beta = t == 0 ? 0.0 : sched.betas[t - 1];
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g\n", t, beta, sched.alpha_bars[t]);
        os << buf;
    }
}

}  // namespace drf
