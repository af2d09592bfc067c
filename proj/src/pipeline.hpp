#pragma once

#include <memory>

#include "config.hpp"
#include "metrics.hpp"
#include "task.hpp"

namespace drf {

struct RunOutput {
    Latent out;
    RunTrace trace;
    MetricReport metrics;
    double runtime_ms = 0.0;
};

// Score model selected by the config: the analytic mixture built from the
// task, or a toy denoiser trained on (or loaded for) the same components.
std::unique_ptr<ScoreModel> build_model(const ResolvedConfig& cfg, const TaskArtifacts& task,
                                        const NoiseSchedule& sched);

// One controlled (+ optional feedback) sampling run with a fixed seed.
RunOutput run_single(const ResolvedConfig& cfg, const ScoreModel& model,
                     const TaskArtifacts& task, const NoiseSchedule& sched, const StepGrid& grid,
                     uint64_t seed);

// Full `sample` command: generate task, build model, run, persist artifacts
// (image, references, trace, metrics, resolved config) under out_dir.
void run_sample_command(const ResolvedConfig& cfg, const std::string& out_dir);

void ensure_dir(const std::string& path);

}  // namespace drf
