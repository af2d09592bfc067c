#pragma once

#include <ostream>
#include <vector>

#include "latent.hpp"

namespace drf {

enum class ScheduleKind { linear, cosine };
enum class GridSpacing { uniform, trailing };

/*
 * Discrete noise schedule. alpha_bars[t] is the cumulative product of
 * (1 - beta) up to training step t, with alpha_bars[0] == 1 so t = 0 is the
 * clean-data boundary. betas[i] is the variance of training step i+1.
 * Immutable after construction; shared read-only across concurrent runs.
 */
struct NoiseSchedule {
    ScheduleKind kind = ScheduleKind::linear;
    std::vector<double> betas;       // length T
    std::vector<double> alpha_bars;  // length T+1, strictly decreasing, in (0,1]

    int t_train() const { return int(betas.size()); }

    double alpha_bar(int t) const {
        if (t < 0 || t >= int(alpha_bars.size()))
            throw ScheduleError("timestep " + std::to_string(t) + " outside schedule [0," +
                                std::to_string(alpha_bars.size() - 1) + "]");
        return alpha_bars[size_t(t)];
    }

    // alpha_bar(t) / alpha_bar(t_prev) for a step t -> t_prev with t >= t_prev.
    double step_ratio(int t, int t_prev) const;
};

NoiseSchedule make_schedule(ScheduleKind kind, int t_train, double beta_min, double beta_max);

// Builds a schedule from an explicit alpha_bar sequence (index 0 must be 1);
// betas are derived so the cumulative-product identity holds exactly.
NoiseSchedule schedule_from_alpha_bars(std::vector<double> alpha_bars);

// z_t = sqrt(abar_t) * z0 + sqrt(1 - abar_t) * eps
Latent forward_diffuse(const Latent& z0, int t, const Latent& eps, const NoiseSchedule& sched);

/*
 * Inference-time step grid: strictly descending training-step indices.
 * The sampler consumes one transition per entry; the final transition from
 * the last entry lands on t = 0 (clean data).
 */
struct StepGrid {
    std::vector<int> timesteps;

    int steps() const { return int(timesteps.size()); }
    int at(int i) const { return timesteps[size_t(i)]; }
    // Target of transition i; t = 0 after the last grid entry.
    int prev(int i) const { return i + 1 < steps() ? timesteps[size_t(i) + 1] : 0; }
};

StepGrid make_step_grid(const NoiseSchedule& sched, int steps, GridSpacing spacing);

// Validates descending order, index range and adjacent ratios for an explicit grid.
StepGrid step_grid_from_timesteps(const NoiseSchedule& sched, std::vector<int> timesteps);

// Columns: t, beta, alpha_bar. Row t = 0 has beta = 0 (no step).
void dump_schedule_csv(const NoiseSchedule& sched, std::ostream& os);

}  // namespace drf
