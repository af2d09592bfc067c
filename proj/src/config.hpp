#pragma once

#include <string>

#include "feedback.hpp"
#include "metrics.hpp"
#include "task.hpp"

#include "json.hpp"

namespace drf {

struct ModelConfig {
    std::string kind = "gaussian_mixture";  // or "toy_denoiser"
    std::string weights;                    // optional denoiser weights path
    int hidden       = 64;
    int train_epochs = 400;
    double train_lr  = 0.02;
};

struct BenchConfig {
    std::string axis = "drf";  // none|drf|af_only|iterations|window|weight|sampler|gradient_mode
    int seeds        = 50;
    int workers      = 1;
    std::vector<int> iterations{1, 2, 3, 4, 5, 6};
    std::vector<int> windows{10, 20, 50};
    double af_rho = 3.0;  // rho of the full-feedback arm in the af_only plan
    // Explicit variant list (machine-generated plans): pairs of
    // (name, {dotted key -> value}). Overrides the axis when nonempty.
    std::vector<std::pair<std::string, nlohmann::json>> variants;
};

struct IoConfig {
    std::string out_dir = "out";
    bool write_ppm   = true;
    bool write_trace = true;
    bool write_plots = true;
};

struct GradcheckConfig {
    int instances    = 100;
    double tolerance = 1e-4;
    uint64_t seed    = 1234;
};

struct ResolvedConfig {
    uint64_t seed = 0;

    ScheduleKind schedule_kind = ScheduleKind::linear;
    int t_train      = 1000;
    double beta_min  = 1e-4;
    double beta_max  = 2e-2;
    GridSpacing spacing = GridSpacing::uniform;

    ModelConfig model;

    SamplerKind sampler_kind = SamplerKind::ddim;
    int steps  = 50;
    double eta = 0.0;

    double tau_s  = 0.85;
    double tau_a  = 0.05;
    double cutoff = 0.6;

    bool drf_enabled = true;
    DrfConfig drf;

    TaskSpec task;
    BenchConfig bench;
    MetricThresholds thresholds;
    int patch = 4;
    IoConfig io;
    GradcheckConfig gradcheck;

    std::string hash;

    NoiseSchedule make_noise_schedule() const;
    StepGrid make_grid(const NoiseSchedule& sched) const;
};

/*
 * Layered run configuration: defaults, then an optional TOML or JSON file,
 * then dotted-path overrides. resolve() validates every module-level
 * invariant before anything runs and stamps the result with a stable digest
 * of the fully resolved store.
 */
class RunConfig {
public:
    RunConfig();

    void load_file(const std::string& path);
    void load_toml_text(const std::string& text, const std::string& origin = "<inline>");
    void load_json_text(const std::string& text, const std::string& origin = "<inline>");
    void set_override(const std::string& dotted_key, const std::string& value);
    void set_value(const std::string& dotted_key, const nlohmann::json& value);

    std::string hash() const;
    std::string dump(int indent = 2) const;
    const nlohmann::json& store() const { return store_; }

    ResolvedConfig resolve() const;

private:
    void merge(const nlohmann::json& patch, const std::string& origin);
    nlohmann::json store_;
};

// Minimal TOML reader covering this project's configs: [section] headers,
// bare/dotted keys, strings, booleans, integers, floats and flat arrays.
nlohmann::json parse_toml(const std::string& text, const std::string& origin);

// Infers bool / integer / float / array / string, matching the TOML reader.
nlohmann::json parse_scalar(const std::string& text);

uint64_t fnv1a64(const std::string& bytes);

}  // namespace drf
