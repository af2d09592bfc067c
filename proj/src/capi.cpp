#include "drf/drf.h"

#include <cstring>
#include <fstream>

#include "bench.hpp"
#include "config.hpp"
#include "gradcheck.hpp"
#include "log.hpp"
#include "pipeline.hpp"

using namespace drf;

struct drf_config {
    RunConfig impl;
};

namespace {

thread_local std::string g_last_error;

drf_status status_of(ErrorCode code) {
    switch (code) {
        case ErrorCode::config: return DRF_CONFIG_ERROR;
        case ErrorCode::numeric: return DRF_NUMERIC_ERROR;
        case ErrorCode::io: return DRF_IO_ERROR;
        default: return DRF_INTERNAL_ERROR;
    }
}

template <typename Fn>
drf_status guarded(Fn&& fn) {
    try {
        g_last_error.clear();
        return fn();
    } catch (const Error& e) {
        g_last_error = e.what();
        return status_of(e.code);
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return DRF_INTERNAL_ERROR;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return DRF_INTERNAL_ERROR;
    }
}

drf_status require_handle(const drf_config* cfg) {
    if (cfg) return DRF_OK;
    g_last_error = "null config handle";
    return DRF_CONFIG_ERROR;
}

}  // namespace

extern "C" {

drf_status drf_config_create(drf_config** out) {
    if (!out) {
        g_last_error = "null output pointer";
        return DRF_CONFIG_ERROR;
    }
    return guarded([&] {
        *out = new drf_config();
        return DRF_OK;
    });
}

void drf_config_destroy(drf_config* cfg) { delete cfg; }

drf_status drf_config_load(drf_config* cfg, const char* path) {
    if (drf_status rc = require_handle(cfg); rc != DRF_OK) return rc;
    if (!path) {
        g_last_error = "null path";
        return DRF_CONFIG_ERROR;
    }
    return guarded([&] {
        cfg->impl.load_file(path);
        return DRF_OK;
    });
}

drf_status drf_config_set(drf_config* cfg, const char* key, const char* value) {
    if (drf_status rc = require_handle(cfg); rc != DRF_OK) return rc;
    if (!key || !value) {
        g_last_error = "null key or value";
        return DRF_CONFIG_ERROR;
    }
    return guarded([&] {
        cfg->impl.set_override(key, value);
        return DRF_OK;
    });
}

drf_status drf_config_hash(const drf_config* cfg, char* buf, size_t buflen) {
    if (drf_status rc = require_handle(cfg); rc != DRF_OK) return rc;
    if (!buf || buflen < 17) {
        g_last_error = "hash buffer must hold at least 17 bytes";
        return DRF_CONFIG_ERROR;
    }
    return guarded([&] {
        const std::string h = cfg->impl.hash();
        std::memcpy(buf, h.c_str(), h.size() + 1);
        return DRF_OK;
    });
}

drf_status drf_config_dump(const drf_config* cfg, char* buf, size_t buflen, size_t* written) {
    if (drf_status rc = require_handle(cfg); rc != DRF_OK) return rc;
    if (!buf || buflen == 0) {
        g_last_error = "null or empty dump buffer";
        return DRF_CONFIG_ERROR;
    }
    return guarded([&] {
        const std::string text = cfg->impl.dump(2);
        const size_t n         = std::min(text.size(), buflen - 1);
        std::memcpy(buf, text.data(), n);
        buf[n] = '\0';
        if (written) *written = n;
        return DRF_OK;
    });
}

drf_status drf_run_sample(const drf_config* cfg, const char* out_dir) {
    if (drf_status rc = require_handle(cfg); rc != DRF_OK) return rc;
    if (!out_dir) {
        g_last_error = "null output directory";
        return DRF_CONFIG_ERROR;
    }
    return guarded([&] {
        const ResolvedConfig r = cfg->impl.resolve();
        run_sample_command(r, out_dir);
        return DRF_OK;
    });
}

drf_status drf_run_bench(const drf_config* cfg, const char* out_dir) {
    if (drf_status rc = require_handle(cfg); rc != DRF_OK) return rc;
    if (!out_dir) {
        g_last_error = "null output directory";
        return DRF_CONFIG_ERROR;
    }
    return guarded([&] {
        const ResolvedConfig r    = cfg->impl.resolve();
        const ExperimentPlan plan = build_plan(cfg->impl);
        run_experiment(plan, out_dir, r.bench.workers, /*write_artifacts=*/true,
                       r.io.write_plots);
        return DRF_OK;
    });
}

drf_status drf_run_gradcheck(const drf_config* cfg, double* max_rel_err) {
    if (drf_status rc = require_handle(cfg); rc != DRF_OK) return rc;
    return guarded([&] {
        const ResolvedConfig r  = cfg->impl.resolve();
        const GradCheckResult g = run_gradcheck(r);
        if (max_rel_err) *max_rel_err = g.max_rel_err;
        if (!g.passed) {
            g_last_error = "gradient check failed: " + g.worst;
            return DRF_CHECK_FAILED;
        }
        return DRF_OK;
    });
}

drf_status drf_dump_schedule(const drf_config* cfg, const char* csv_path) {
    if (drf_status rc = require_handle(cfg); rc != DRF_OK) return rc;
    if (!csv_path) {
        g_last_error = "null csv path";
        return DRF_CONFIG_ERROR;
    }
    return guarded([&] {
        const ResolvedConfig r    = cfg->impl.resolve();
        const NoiseSchedule sched = r.make_noise_schedule();
        std::ofstream os(csv_path);
        if (!os) throw IoError("cannot write '" + std::string(csv_path) + "'");
        dump_schedule_csv(sched, os);
        return DRF_OK;
    });
}

const char* drf_last_error(void) { return g_last_error.c_str(); }

const char* drf_status_name(drf_status status) {
    switch (status) {
        case DRF_OK: return "ok";
        case DRF_CHECK_FAILED: return "check_failed";
        case DRF_CONFIG_ERROR: return "config_error";
        case DRF_NUMERIC_ERROR: return "numeric_error";
        case DRF_IO_ERROR: return "io_error";
        default: return "internal_error";
    }
}

const char* drf_version(void) { return "0.1.0"; }

}  // extern "C"
