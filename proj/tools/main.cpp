// Command-line front end. Deliberately built against the public C API only;
// everything engine-side stays behind the shared library boundary.

#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "drf/drf.h"

namespace {

struct ConfigDeleter {
    void operator()(drf_config* c) const { drf_config_destroy(c); }
};
using ConfigPtr = std::unique_ptr<drf_config, ConfigDeleter>;

int fail(drf_status rc) {
    std::fprintf(stderr, "error (%s): %s\n", drf_status_name(rc), drf_last_error());
    return int(rc);
}

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> sets;
    std::string out_dir;
    std::string seed;
    std::string workers;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool with_out = true) {
    cmd->add_option("--config", args.config_path, "TOML or JSON config file");
    cmd->add_option("--set", args.sets, "dotted-path override, key=value (repeatable)")
        ->take_all();
    if (with_out) cmd->add_option("--out", args.out_dir, "output directory (default: io.out_dir)");
    cmd->add_option("--seed", args.seed, "run seed (u64)");
    cmd->add_option("--workers", args.workers, "bench worker threads");
}

// Builds a config handle from file + overrides; returns nullptr after
// printing the failure.
ConfigPtr make_config(const CommonArgs& args, drf_status& rc_out) {
    drf_config* raw = nullptr;
    drf_status rc   = drf_config_create(&raw);
    ConfigPtr cfg(raw);
    if (rc != DRF_OK) {
        rc_out = rc;
        return nullptr;
    }
    if (!args.config_path.empty()) {
        rc = drf_config_load(cfg.get(), args.config_path.c_str());
        if (rc != DRF_OK) {
            rc_out = rc;
            return nullptr;
        }
    }
    for (const auto& kv : args.sets) {
        const size_t eq = kv.find('=');
        if (eq == std::string::npos) {
            std::fprintf(stderr, "error (config_error): --set expects key=value, got '%s'\n",
                         kv.c_str());
            rc_out = DRF_CONFIG_ERROR;
            return nullptr;
        }
        rc = drf_config_set(cfg.get(), kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str());
        if (rc != DRF_OK) {
            rc_out = rc;
            return nullptr;
        }
    }
    if (!args.seed.empty()) {
        rc = drf_config_set(cfg.get(), "seed", args.seed.c_str());
        if (rc != DRF_OK) {
            rc_out = rc;
            return nullptr;
        }
    }
    if (!args.workers.empty()) {
        rc = drf_config_set(cfg.get(), "bench.workers", args.workers.c_str());
        if (rc != DRF_OK) {
            rc_out = rc;
            return nullptr;
        }
    }
    if (!args.out_dir.empty()) {
        rc = drf_config_set(cfg.get(), "io.out_dir", args.out_dir.c_str());
        if (rc != DRF_OK) {
            rc_out = rc;
            return nullptr;
        }
    }
    rc_out = DRF_OK;
    return cfg;
}

std::string config_hash(const ConfigPtr& cfg) {
    char buf[17] = {0};
    drf_config_hash(cfg.get(), buf, sizeof(buf));
    return buf;
}

std::string out_dir_of(const ConfigPtr& cfg, const CommonArgs& args) {
    if (!args.out_dir.empty()) return args.out_dir;
    // io.out_dir from the resolved config dump.
    std::vector<char> buf(1 << 16);
    size_t written = 0;
    if (drf_config_dump(cfg.get(), buf.data(), buf.size(), &written) != DRF_OK) return "out";
    const std::string text(buf.data(), written);
    const std::string needle = "\"out_dir\": \"";
    const size_t pos         = text.find(needle);
    if (pos == std::string::npos) return "out";
    const size_t end = text.find('"', pos + needle.size());
    return text.substr(pos + needle.size(), end - pos - needle.size());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "drf - guided diffusion sampling with dual recursive feedback\n"
        "exit codes: 0 ok, 1 check failed, 2 config error, 3 numeric error, 4 io error"};
    app.require_subcommand(1);

    CommonArgs sample_args, bench_args, grad_args, sched_args;
    std::string sched_csv = "schedule.csv";

    CLI::App* cmd_sample = app.add_subcommand("sample", "one controlled (+ feedback) sampling run");
    add_common(cmd_sample, sample_args);

    CLI::App* cmd_bench = app.add_subcommand("bench", "run the configured benchmark plan");
    add_common(cmd_bench, bench_args);

    CLI::App* cmd_grad = app.add_subcommand("gradcheck", "finite-difference gradient suite");
    add_common(cmd_grad, grad_args, /*with_out=*/false);

    CLI::App* cmd_sched = app.add_subcommand("schedule", "dump the noise schedule as CSV");
    add_common(cmd_sched, sched_args, /*with_out=*/false);
    cmd_sched->add_option("--csv", sched_csv, "output csv path");

    CLI11_PARSE(app, argc, argv);

    if (cmd_sample->parsed()) {
        drf_status rc;
        ConfigPtr cfg = make_config(sample_args, rc);
        if (!cfg) return fail(rc);
        const std::string out = out_dir_of(cfg, sample_args);
        std::printf("config %s -> %s\n", config_hash(cfg).c_str(), out.c_str());
        rc = drf_run_sample(cfg.get(), out.c_str());
        return rc == DRF_OK ? 0 : fail(rc);
    }

    if (cmd_bench->parsed()) {
        drf_status rc;
        ConfigPtr cfg = make_config(bench_args, rc);
        if (!cfg) return fail(rc);
        const std::string out = out_dir_of(cfg, bench_args);
        std::printf("config %s -> %s\n", config_hash(cfg).c_str(), out.c_str());
        rc = drf_run_bench(cfg.get(), out.c_str());
        if (rc == DRF_OK) std::printf("bench done: %s/results.csv, %s/summary.json\n", out.c_str(), out.c_str());
        return rc == DRF_OK ? 0 : fail(rc);
    }

    if (cmd_grad->parsed()) {
        drf_status rc;
        ConfigPtr cfg = make_config(grad_args, rc);
        if (!cfg) return fail(rc);
        double max_rel_err = 0.0;
        rc                 = drf_run_gradcheck(cfg.get(), &max_rel_err);
        std::printf("gradcheck max relative error: %.3e\n", max_rel_err);
        if (rc == DRF_CHECK_FAILED) {
            std::fprintf(stderr, "%s\n", drf_last_error());
            return 1;
        }
        return rc == DRF_OK ? 0 : fail(rc);
    }

    if (cmd_sched->parsed()) {
        drf_status rc;
        ConfigPtr cfg = make_config(sched_args, rc);
        if (!cfg) return fail(rc);
        rc = drf_dump_schedule(cfg.get(), sched_csv.c_str());
        if (rc == DRF_OK) std::printf("schedule written to %s\n", sched_csv.c_str());
        return rc == DRF_OK ? 0 : fail(rc);
    }

    return 0;
}
