#include "pipeline.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>

#include "image_io.hpp"
#include "log.hpp"

namespace drf {

void ensure_dir(const std::string& path) {
    std::error_code ec;
    std::filesystem::create_directories(path, ec);
    if (ec) throw IoError("cannot create directory '" + path + "': " + ec.message());
}

std::unique_ptr<ScoreModel> build_model(const ResolvedConfig& cfg, const TaskArtifacts& task,
                                        const NoiseSchedule& sched) {
    if (cfg.model.kind == "gaussian_mixture") {
        if (!cfg.model.weights.empty()) {
            std::ifstream is(cfg.model.weights);
            if (!is) throw ConfigError("model.weights: cannot read '" + cfg.model.weights + "'");
            std::stringstream buf;
            buf << is.rdbuf();
            return std::make_unique<GaussianMixtureScore>(
                GaussianMixtureScore::from_json(buf.str(), sched));
        }
        return build_task_model(task, cfg.task, sched);
    }

    // toy_denoiser: load weights when given, otherwise train on the task's
    // component latents.
    if (!cfg.model.weights.empty() && std::filesystem::exists(cfg.model.weights)) {
        auto model = std::make_unique<ToyDenoiser>(ToyDenoiser::load(cfg.model.weights, sched));
        log_info("loaded denoiser weights from %s", cfg.model.weights.c_str());
        return model;
    }
    std::vector<std::pair<Latent, Condition>> dataset;
    dataset.emplace_back(task.ctx.z0_structure, Condition::of(cfg.task.gen_label));
    dataset.emplace_back(task.ctx.z0_appearance, Condition::of(cfg.task.app_label));
    auto model = std::make_unique<ToyDenoiser>(train_denoiser(
        dataset, sched, cfg.model.train_epochs, cfg.model.train_lr, cfg.seed, cfg.model.hidden));
    log_info("trained toy denoiser, final loss %.6f", model->train_meta.final_loss);
    if (!cfg.model.weights.empty()) model->save(cfg.model.weights);
    return model;
}

RunOutput run_single(const ResolvedConfig& cfg, const ScoreModel& model,
                     const TaskArtifacts& task, const NoiseSchedule& sched, const StepGrid& grid,
                     uint64_t seed) {
    const auto t0 = std::chrono::steady_clock::now();

    RunOutput out;
    out.trace.seed        = seed;
    out.trace.config_hash = cfg.hash;

    const ControlContext& ctx = task.ctx;
    ControlledStepFn step = [&](const Latent& z, int idx, int t, int t_prev, SamplerState& st,
                                RngStream& rng) {
        return toy_controlled_step(z, idx, grid.steps(), t, t_prev, ctx, model, sched,
                                   cfg.sampler_kind, cfg.eta, cfg.drf.omega, st, rng);
    };
    if (cfg.drf_enabled)
        step = drf_hook(std::move(step), cfg.drf, ctx.z0_appearance, ctx.y_app, ctx.y_gen, model,
                        sched, &out.trace);

    RngStream rng(seed);
    Latent z = gaussian_latent(ctx.z0_structure.channels, ctx.z0_structure.height,
                               ctx.z0_structure.width, rng);
    SamplerState state;
    for (int i = 0; i < grid.steps(); ++i) {
        const int t      = grid.at(i);
        const int t_prev = grid.prev(i);
        out.trace.record_step(i, t, t_prev, z, z);  // latent stats pre-step
        try {
            z = step(z, i, t, t_prev, state, rng);
        } catch (const Error& e) {
            throw Error(e.code,
                        "step " + std::to_string(i) + " (t=" + std::to_string(t) + "): " + e.what());
        }
        if (!all_finite(z))
            throw NumericError("non-finite latent after step " + std::to_string(i) +
                               " (t=" + std::to_string(t) + ")");
    }

    out.out     = z;
    out.metrics = evaluate_metrics(z, ctx, cfg.patch, cfg.thresholds);
    out.runtime_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

void run_sample_command(const ResolvedConfig& cfg, const std::string& out_dir) {
    ensure_dir(out_dir);

    const NoiseSchedule sched = cfg.make_noise_schedule();
    const StepGrid grid       = cfg.make_grid(sched);
    TaskArtifacts task        = generate_task(cfg.task, cfg.tau_s, cfg.tau_a, cfg.cutoff);
    auto model                = build_model(cfg, task, sched);

    const RunOutput run = run_single(cfg, *model, task, sched, grid, cfg.seed);

    if (cfg.io.write_ppm) {
        write_ppm(run.out, out_dir + "/out.ppm");
        write_ppm(task.ctx.z0_structure, out_dir + "/structure.ppm");
        write_ppm(task.ctx.z0_appearance, out_dir + "/appearance.ppm");
    }
    if (cfg.io.write_trace) {
        std::ofstream os(out_dir + "/trace.jsonl");
        if (!os) throw IoError("cannot write '" + out_dir + "/trace.jsonl'");
        run.trace.write_jsonl(os);
    }
    {
        std::ofstream os(out_dir + "/metrics.csv");
        if (!os) throw IoError("cannot write '" + out_dir + "/metrics.csv'");
        os << "seed,config,struct_iou,app_stat_dist,self_sim_dist,success\n";
        os << cfg.seed << ',' << cfg.hash << ',' << run.metrics.struct_iou << ','
           << run.metrics.app_stat_dist << ',' << run.metrics.self_sim_dist << ','
           << (run.metrics.success ? 1 : 0) << "\n";
    }

    log_info("sample done: config %s seed %llu iou=%.3f app_dist=%.3f self_sim=%.3f (%.1f ms)",
             cfg.hash.c_str(), static_cast<unsigned long long>(cfg.seed), run.metrics.struct_iou,
             run.metrics.app_stat_dist, run.metrics.self_sim_dist, run.runtime_ms);
}

}  // namespace drf
