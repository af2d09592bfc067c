#pragma once

#include "pipeline.hpp"

namespace drf {

struct PlanVariant {
    std::string name;
    ResolvedConfig cfg;
};

/*
 * A bench plan: variants against one task, every variant run over the same
 * seed list so per-seed comparisons are paired.
 */
struct ExperimentPlan {
    std::vector<PlanVariant> variants;
    std::vector<uint64_t> seeds;

    void validate() const;
};

// Expands bench.axis (or the explicit bench.variants list) into a plan.
ExperimentPlan build_plan(const RunConfig& base);

struct RunRow {
    std::string variant;
    uint64_t seed = 0;
    MetricReport metrics;
    double runtime_ms = 0.0;
    bool failed = false;
    std::string error;
};

struct VariantSummary {
    std::string name;
    std::string config_hash;
    int runs = 0, failures = 0;
    double median_iou = 0, iqr_iou = 0;
    double median_app = 0, iqr_app = 0;
    double median_self_sim = 0, iqr_self_sim = 0;
    double success_rate = 0;
    double median_runtime_ms = 0;
};

struct BenchResult {
    std::vector<RunRow> rows;
    std::vector<VariantSummary> summaries;  // ranked best-first by median app distance
};

/*
 * Runs every (variant, seed) cell, up to `workers` concurrently, writes
 * results.csv, summary.json, per-run traces/images and optional plots under
 * out_dir. Individual failures are recorded and skipped; more than 10%
 * failures aborts the plan.
 */
BenchResult run_experiment(const ExperimentPlan& plan, const std::string& out_dir, int workers,
                           bool write_artifacts = true, bool write_plots = true);

double median_of(std::vector<double> v);
double iqr_of(std::vector<double> v);

}  // namespace drf
