#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "latent.hpp"

namespace drf {

struct StepRecord {
    int index  = 0;
    int t      = 0;
    int t_prev = 0;
    double latent_mean = 0, latent_std = 0, latent_min = 0, latent_max = 0;
    double eps_norm = 0;
};

// One record per refinement iteration of an active step.
struct DrfIterRecord {
    int t = 0;
    int iteration = 0;
    double loss_app = 0;
    std::optional<double> loss_gen;  // absent on the first iteration
    double weight    = 0;
    double loss_drf  = 0;
    double eps_norm  = 0;
    double grad_norm = 0;
};

struct RunTrace {
    uint64_t seed = 0;
    std::string config_hash;
    std::vector<StepRecord> steps;
    std::vector<DrfIterRecord> drf_iters;
    int drf_refine_calls = 0;

    void record_step(int index, int t, int t_prev, const Latent& z, const Latent& eps_hat);

    // One JSON object per line; step records then refinement records in order.
    void write_jsonl(std::ostream& os) const;
    void write_summary_csv(std::ostream& os) const;

    bool operator==(const RunTrace&) const;
};

bool operator==(const StepRecord&, const StepRecord&);
bool operator==(const DrfIterRecord&, const DrfIterRecord&);

}  // namespace drf
