#pragma once

#include <array>
#include <memory>

#include "control.hpp"
#include "score.hpp"

namespace drf {

enum class ShapeKind { disk, bar, l_shape, ring };

ShapeKind shape_kind_from_string(const std::string& s);
std::string to_string(ShapeKind k);

/*
 * One structure/appearance fusion task: a posed shape on a 16x16 canvas and
 * a seeded noise texture matched to a per-channel palette. The generation and
 * appearance conditions map to disjoint mixture components, standing in for
 * cross-category fusions.
 */
struct TaskSpec {
    ShapeKind shape = ShapeKind::disk;
    double pos_x    = 7.5;
    double pos_y    = 7.5;
    double rotation = 0.0;   // radians
    double size     = 5.0;   // radius / half-length, shape dependent

    std::array<double, 3> palette_mean{0.55, -0.35, 0.15};
    std::array<double, 3> palette_std{1.25, 1.25, 1.25};
    double texture_amplitude = 0.5;

    int gen_label = 0;
    int app_label = 1;
    uint64_t seed = 0;

    int channels = 3;
    int canvas   = 16;

    void validate() const;
};

struct TaskArtifacts {
    ToyImage structure_image;
    ToyImage appearance_image;
    ControlContext ctx;  // strengths filled in by the caller's control config
};

// Renders the structure shape (+1 inside, -1 outside) and the palette-matched
// texture, and packages the control context. Deterministic per spec.
TaskArtifacts generate_task(const TaskSpec& spec, double tau_s, double tau_a, double struct_cutoff);

// Analytic score for the task: one component per condition, generation ->
// structure rendering, appearance -> texture reference, null -> both.
std::unique_ptr<GaussianMixtureScore> build_task_model(const TaskArtifacts& task,
                                                       const TaskSpec& spec,
                                                       const NoiseSchedule& sched);

}  // namespace drf
