// Independent oracles used by the unit and acceptance suites. Everything here
// recomputes expected values from first principles (brute-force densities,
// finite differences, counting) without touching the implementation paths it
// checks.
#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "latent.hpp"
#include "schedule.hpp"

namespace oracle {

using drf::Latent;
using drf::NoiseSchedule;

// log of the unit-variance mixture marginal at time t, equal component weights.
inline double log_mixture_density(const Latent& z, const std::vector<Latent>& means, double abar) {
    const double sab = std::sqrt(abar);
    double max_e     = -1e300;
    std::vector<double> es(means.size());
    for (size_t k = 0; k < means.size(); ++k) {
        double d2 = 0.0;
        for (int j = 0; j < z.size(); ++j) {
            const double d = z[j] - sab * means[k][j];
            d2 += d * d;
        }
        es[k] = -0.5 * d2;
        max_e = std::max(max_e, es[k]);
    }
    double s = 0.0;
    for (double e : es) s += std::exp(e - max_e);
    return max_e + std::log(s / double(means.size()));
}

// eps* = -sqrt(1-abar) * grad log p_t(z), via central differences of the log
// density; a brute-force check of the closed-form mixture denoiser.
inline Latent mixture_eps_fd(const Latent& z, const std::vector<Latent>& means, double abar) {
    Latent out(z.channels, z.height, z.width);
    Latent zp = z;
    for (int j = 0; j < z.size(); ++j) {
        const double h = 1e-5 * (1.0 + std::abs(z[j]));
        zp[j]          = z[j] + h;
        const double lp = log_mixture_density(zp, means, abar);
        zp[j]          = z[j] - h;
        const double lm = log_mixture_density(zp, means, abar);
        zp[j]          = z[j];
        out[j]         = -std::sqrt(1.0 - abar) * (lp - lm) / (2.0 * h);
    }
    return out;
}

// Central-difference gradient of an arbitrary scalar function of a latent.
inline Latent fd_gradient(const std::function<double(const Latent&)>& f, const Latent& x,
                          double rel_step = 1e-5) {
    Latent g(x.channels, x.height, x.width);
    Latent xp = x;
    for (int j = 0; j < x.size(); ++j) {
        const double h = rel_step * (1.0 + std::abs(x[j]));
        xp[j]          = x[j] + h;
        const double fp = f(xp);
        xp[j]          = x[j] - h;
        const double fm = f(xp);
        xp[j]          = x[j];
        g[j]           = (fp - fm) / (2.0 * h);
    }
    return g;
}

// Exact reverse-flow map for unit-variance single-Gaussian data: every
// marginal has unit variance, so trajectories translate by the drift of the
// component mean only.
inline Latent exact_reverse_map(const Latent& z_hi, const Latent& mu, double abar_hi,
                                double abar_lo) {
    Latent out = z_hi;
    const double shift = std::sqrt(abar_lo) - std::sqrt(abar_hi);
    for (int j = 0; j < out.size(); ++j) out[j] += shift * mu[j];
    return out;
}

// Least-squares slope of log(err) against log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& err) {
    const size_t n = x.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < n; ++i) {
        const double lx = std::log(x[i]);
        const double ly = std::log(err[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (double(n) * sxy - sx * sy) / (double(n) * sxx - sx * sx);
}

}  // namespace oracle
