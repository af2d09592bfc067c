#pragma once

#include "control.hpp"

namespace drf {

// |a AND b| / |a OR b| over binary masks; 1 when both are empty.
double mask_iou(const Latent& a, const Latent& b);

// Euclidean norm of the concatenated per-channel (mean, std) differences.
double appearance_stat_distance(const Latent& gen, const Latent& app);

// Frobenius distance between cosine-similarity Gram matrices of
// non-overlapping patch vectors. Scale-invariant per construction.
double patch_self_similarity_distance(const Latent& gen, const Latent& struct_ref, int patch);

struct MetricThresholds {
    double theta_s = 0.7;  // minimum structure IoU for success
    double theta_a = 0.5;  // maximum appearance stat distance for success
};

struct MetricReport {
    double struct_iou    = 0.0;
    double app_stat_dist = 0.0;
    double self_sim_dist = 0.0;
    bool success         = false;
};

MetricReport evaluate_metrics(const Latent& out, const ControlContext& ctx, int patch,
                              const MetricThresholds& thresholds);

}  // namespace drf
