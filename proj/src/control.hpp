#pragma once

#include "feedback.hpp"
#include "sampler.hpp"
#include "score.hpp"

namespace drf {

// Procedural C x H x W image, values in [-1, 1].
struct ToyImage {
    int channels = 0, height = 0, width = 0;
    std::vector<double> pixels;

    ToyImage() = default;
    ToyImage(int c, int h, int w) : channels(c), height(h), width(w), pixels(size_t(c) * h * w, 0.0) {}
    double& at(int c, int y, int x) { return pixels[(size_t(c) * height + y) * width + x]; }
    double at(int c, int y, int x) const { return pixels[(size_t(c) * height + y) * width + x]; }
};

// Identity encoding; stands in for a latent encoder.
Latent encode_toy_image(const ToyImage& img);

// Binary mask (replicated across channels): channel-mean intensity > 0.
Latent threshold_mask(const Latent& z);

/*
 * Everything the controllable step consumes: clean structure and appearance
 * references, their conditions, and the injection strengths. The toy step
 * keeps the two roles of pretrained feature surgery in closed form --
 * spatial anchoring to the structure early in sampling, channel-statistic
 * alignment to the appearance throughout.
 */
struct ControlContext {
    Latent z0_structure;
    Latent structure_mask;
    Latent z0_appearance;
    Condition y_gen, y_app;
    double tau_s        = 0.0;  // structure anchoring strength, [0,1]
    double tau_a        = 0.0;  // appearance statistics strength, [0,1]
    double struct_cutoff = 0.6; // fraction of grid steps with anchoring active

    void validate() const;
};

/*
 * One controllable denoise step:
 *   1. guided noise prediction for the generation condition,
 *   2. posterior-mean inversion,
 *   3. masked blend toward the structure reference (early steps only),
 *   4. per-channel mean/std shift toward the appearance reference,
 *   5. advance to t_prev with the configured solver.
 * With both strengths at zero this is exactly cfg_predict + sampler_step.
 */
Latent toy_controlled_step(const Latent& z_t, int step_index, int step_count, int t, int t_prev,
                           const ControlContext& ctx, const ScoreModel& model,
                           const NoiseSchedule& sched, SamplerKind kind, double eta, double omega,
                           SamplerState& state, RngStream& rng);

// Moves each channel's mean and uncorrected std a fraction tau toward the
// reference; zero-variance channels are shifted only.
void match_channel_stats(Latent& z, const Latent& reference, double tau);

}  // namespace drf
