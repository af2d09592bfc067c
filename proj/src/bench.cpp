#include "bench.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <thread>

#include "image_io.hpp"
#include "log.hpp"
#include "plots.hpp"

namespace drf {

double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double iqr_of(std::vector<double> v) {
    if (v.size() < 2) return 0.0;
    std::sort(v.begin(), v.end());
    auto quantile = [&](double q) {
        const double pos = q * double(v.size() - 1);
        const size_t lo  = size_t(pos);
        const double fr  = pos - double(lo);
        return lo + 1 < v.size() ? v[lo] * (1.0 - fr) + v[lo + 1] * fr : v[lo];
    };
    return quantile(0.75) - quantile(0.25);
}

void ExperimentPlan::validate() const {
    if (seeds.empty()) throw ConfigError("bench: plan needs at least one seed");
    for (const auto& v : variants)
        if (v.name.empty()) throw ConfigError("bench: variant names must be nonempty");
}

namespace {

PlanVariant variant_from(const RunConfig& base, const std::string& name,
                         const std::vector<std::pair<std::string, nlohmann::json>>& sets) {
    RunConfig c = base;
    for (const auto& [key, value] : sets) c.set_value(key, value);
    return PlanVariant{name, c.resolve()};
}

}  // namespace

ExperimentPlan build_plan(const RunConfig& base) {
    const ResolvedConfig r = base.resolve();
    ExperimentPlan plan;

    plan.seeds.resize(size_t(r.bench.seeds));
    for (int i = 0; i < r.bench.seeds; ++i)
        plan.seeds[size_t(i)] = splitmix64(r.seed ^ splitmix64(0x9b5a + uint64_t(i)));

    if (!r.bench.variants.empty()) {
        for (const auto& [name, set] : r.bench.variants) {
            std::vector<std::pair<std::string, nlohmann::json>> sets;
            for (const auto& [key, value] : set.items()) sets.emplace_back(key, value);
            plan.variants.push_back(variant_from(base, name, sets));
        }
        plan.validate();
        return plan;
    }

    const std::string& axis = r.bench.axis;
    if (axis == "none") {
        plan.variants.push_back(variant_from(base, "base", {}));
    } else if (axis == "drf") {
        plan.variants.push_back(variant_from(base, "drf_off", {{"drf.enabled", false}}));
        plan.variants.push_back(variant_from(base, "drf_on", {{"drf.enabled", true}}));
    } else if (axis == "af_only") {
        plan.variants.push_back(variant_from(base, "af_only", {{"drf.rho", 0.0}}));
        plan.variants.push_back(variant_from(base, "drf_full", {{"drf.rho", r.bench.af_rho}}));
    } else if (axis == "iterations") {
        for (int n : r.bench.iterations)
            plan.variants.push_back(variant_from(base, "N" + std::to_string(n), {{"drf.N", n}}));
    } else if (axis == "window") {
        for (int w : r.bench.windows) {
            // A full-grid window starts at step 0; partial windows keep the
            // configured warm-up skip.
            const int skip = w >= r.steps ? 0 : r.drf.window_skip;
            const int len  = std::min(w, r.steps - skip);
            plan.variants.push_back(variant_from(base, "win" + std::to_string(w),
                                                 {{"drf.window_skip", skip}, {"drf.window_len", len}}));
        }
    } else if (axis == "weight") {
        for (const char* k : {"exponential", "linear", "cosine"})
            plan.variants.push_back(variant_from(base, k, {{"drf.weight_kind", k}}));
    } else if (axis == "sampler") {
        for (const char* k : {"ddim", "dpm_solver_2s", "dpm_solver_pp_2m"})
            plan.variants.push_back(variant_from(base, k, {{"sampler.kind", k}}));
    } else if (axis == "gradient_mode") {
        for (const char* k : {"full_vjp", "identity_jacobian"})
            plan.variants.push_back(variant_from(base, k, {{"drf.gradient_mode", k}}));
    } else {
        throw ConfigError("bench.axis: unknown value '" + axis + "'");
    }

    plan.validate();
    return plan;
}

namespace {

struct VariantStack {
    NoiseSchedule sched;
    StepGrid grid;
    TaskArtifacts task;
    std::unique_ptr<ScoreModel> model;
};

std::string csv_row(const RunRow& r) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%llu,%s,%.10g,%.10g,%.10g,%d\n",
                  static_cast<unsigned long long>(r.seed), r.variant.c_str(), r.metrics.struct_iou,
                  r.metrics.app_stat_dist, r.metrics.self_sim_dist, r.metrics.success ? 1 : 0);
    return buf;
}

}  // namespace

BenchResult run_experiment(const ExperimentPlan& plan, const std::string& out_dir, int workers,
                           bool write_artifacts, bool write_plots) {
    plan.validate();
    ensure_dir(out_dir);

    // Per-variant stacks are built once and shared read-only by the workers.
    // Models hold a pointer to their schedule, so each stack element must sit
    // at its final address before the model is built.
    std::vector<VariantStack> stacks(plan.variants.size());
    for (size_t vi = 0; vi < plan.variants.size(); ++vi) {
        const auto& v   = plan.variants[vi];
        VariantStack& s = stacks[vi];
        s.sched = v.cfg.make_noise_schedule();
        s.grid  = v.cfg.make_grid(s.sched);
        s.task  = generate_task(v.cfg.task, v.cfg.tau_s, v.cfg.tau_a, v.cfg.cutoff);
        s.model = build_model(v.cfg, s.task, s.sched);
    }

    const size_t n_cells = plan.variants.size() * plan.seeds.size();
    BenchResult result;
    result.rows.resize(n_cells);
    std::vector<RunTrace> traces(n_cells);
    std::vector<Latent> outputs(n_cells);

    std::atomic<size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const size_t cell = next.fetch_add(1);
            if (cell >= n_cells) return;
            const size_t vi = cell / plan.seeds.size();
            const size_t si = cell % plan.seeds.size();
            const auto& var = plan.variants[vi];
            RunRow row;
            row.variant = var.name;
            row.seed    = plan.seeds[si];
            try {
                RunOutput out = run_single(var.cfg, *stacks[vi].model, stacks[vi].task,
                                           stacks[vi].sched, stacks[vi].grid, row.seed);
                row.metrics     = out.metrics;
                row.runtime_ms  = out.runtime_ms;
                traces[cell]    = std::move(out.trace);
                outputs[cell]   = std::move(out.out);
            } catch (const std::exception& e) {
                row.failed = true;
                row.error  = e.what();
                log_warn("bench run %s seed %llu failed: %s", var.name.c_str(),
                         static_cast<unsigned long long>(row.seed), e.what());
            }
            result.rows[cell] = std::move(row);
        }
    };

    const int n_workers = std::max(1, std::min<int>(workers, int(n_cells)));
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    size_t failures = 0;
    for (const auto& r : result.rows) failures += r.failed;
    if (n_cells > 0 && double(failures) > 0.10 * double(n_cells))
        throw NumericError("bench: " + std::to_string(failures) + "/" + std::to_string(n_cells) +
                           " runs failed, aborting plan");

    // Serialized aggregation and artifact output.
    {
        std::ofstream os(out_dir + "/results.csv");
        if (!os) throw IoError("cannot write '" + out_dir + "/results.csv'");
        os << "seed,config,struct_iou,app_stat_dist,self_sim_dist,success\n";
        for (const auto& r : result.rows)
            if (!r.failed) os << csv_row(r);
    }

    nlohmann::json summary;
    summary["seeds"]    = plan.seeds;
    summary["variants"] = nlohmann::json::array();
    for (size_t vi = 0; vi < plan.variants.size(); ++vi) {
        VariantSummary vs;
        vs.name        = plan.variants[vi].name;
        vs.config_hash = plan.variants[vi].cfg.hash;
        std::vector<double> iou, app, ss, rt;
        int ok = 0, succ = 0;
        for (size_t si = 0; si < plan.seeds.size(); ++si) {
            const RunRow& r = result.rows[vi * plan.seeds.size() + si];
            vs.runs += 1;
            if (r.failed) {
                vs.failures += 1;
                continue;
            }
            ++ok;
            succ += r.metrics.success;
            iou.push_back(r.metrics.struct_iou);
            app.push_back(r.metrics.app_stat_dist);
            ss.push_back(r.metrics.self_sim_dist);
            rt.push_back(r.runtime_ms);
        }
        vs.median_iou        = median_of(iou);
        vs.iqr_iou           = iqr_of(iou);
        vs.median_app        = median_of(app);
        vs.iqr_app           = iqr_of(app);
        vs.median_self_sim   = median_of(ss);
        vs.iqr_self_sim      = iqr_of(ss);
        vs.success_rate      = ok > 0 ? double(succ) / ok : 0.0;
        vs.median_runtime_ms = median_of(rt);
        result.summaries.push_back(vs);

        summary["variants"].push_back({{"name", vs.name},
                                       {"config_hash", vs.config_hash},
                                       {"runs", vs.runs},
                                       {"failures", vs.failures},
                                       {"median_struct_iou", vs.median_iou},
                                       {"iqr_struct_iou", vs.iqr_iou},
                                       {"median_app_stat_dist", vs.median_app},
                                       {"iqr_app_stat_dist", vs.iqr_app},
                                       {"median_self_sim_dist", vs.median_self_sim},
                                       {"iqr_self_sim_dist", vs.iqr_self_sim},
                                       {"success_rate", vs.success_rate},
                                       {"median_runtime_ms", vs.median_runtime_ms}});
    }

    // Ranking: appearance distance ascending, ties by structure IoU descending.
    std::sort(result.summaries.begin(), result.summaries.end(),
              [](const VariantSummary& a, const VariantSummary& b) {
                  if (a.median_app != b.median_app) return a.median_app < b.median_app;
                  return a.median_iou > b.median_iou;
              });
    summary["ranking"] = nlohmann::json::array();
    for (const auto& vs : result.summaries) summary["ranking"].push_back(vs.name);

    {
        std::ofstream os(out_dir + "/summary.json");
        if (!os) throw IoError("cannot write '" + out_dir + "/summary.json'");
        os << summary.dump(2) << "\n";
    }

    if (write_artifacts) {
        for (size_t cell = 0; cell < n_cells; ++cell) {
            const RunRow& r = result.rows[cell];
            if (r.failed) continue;
            const std::string dir = out_dir + "/runs/" + r.variant + "_" + std::to_string(r.seed);
            ensure_dir(dir);
            {
                std::ofstream os(dir + "/trace.jsonl");
                traces[cell].write_jsonl(os);
            }
            if (outputs[cell].channels == 1 || outputs[cell].channels == 3)
                write_ppm(outputs[cell], dir + "/out.ppm");
        }
    }

    if (write_plots) {
        ensure_dir(out_dir + "/plots");
        // Median appearance distance per variant.
        std::vector<std::string> labels;
        std::vector<double> values;
        for (const auto& vs : result.summaries) {
            labels.push_back(vs.name);
            values.push_back(vs.median_app);
        }
        svg_bar_chart(out_dir + "/plots/app_stat_dist.svg", "median appearance stat distance",
                      labels, values, "distance");

        // Weight schedules for reference.
        {
            std::vector<Series> series;
            const int n = std::max(2, plan.variants[0].cfg.drf.iterations);
            for (WeightKind k : {WeightKind::exponential, WeightKind::linear, WeightKind::cosine}) {
                Series s;
                s.name = to_string(k);
                for (int i = 0; i < n; ++i)
                    s.y.push_back(iter_weight(i, n, plan.variants[0].cfg.drf.k, k));
                series.push_back(std::move(s));
            }
            svg_line_chart(out_dir + "/plots/weight_schedules.svg", "iteration weights", series,
                           "iteration", "w");
        }

        // Feedback loss curve from the first traced run that has one.
        for (size_t cell = 0; cell < n_cells && write_artifacts; ++cell) {
            if (result.rows[cell].failed || traces[cell].drf_iters.empty()) continue;
            Series app{"L_app", {}}, tot{"L_drf", {}};
            for (const auto& it : traces[cell].drf_iters) {
                app.y.push_back(it.loss_app);
                tot.y.push_back(it.loss_drf);
            }
            svg_line_chart(out_dir + "/plots/loss_curve.svg",
                           "feedback losses (" + result.rows[cell].variant + ", seed " +
                               std::to_string(result.rows[cell].seed) + ")",
                           {app, tot}, "refinement iteration (all active steps)", "loss");
            break;
        }
    }

    return result;
}

}  // namespace drf
