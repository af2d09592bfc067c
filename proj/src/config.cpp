#include "config.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace drf {

namespace {

nlohmann::json default_store() {
    nlohmann::json j;
    j["seed"] = 0;

    j["schedule"]["kind"]     = "linear";
    j["schedule"]["t_train"]  = 1000;
    j["schedule"]["beta_min"] = 1e-4;
    j["schedule"]["beta_max"] = 2e-2;
    j["schedule"]["spacing"]  = "uniform";

    j["model"]["kind"]         = "gaussian_mixture";
    j["model"]["weights"]      = "";
    j["model"]["hidden"]       = 64;
    j["model"]["train_epochs"] = 400;
    j["model"]["train_lr"]     = 0.02;

    j["sampler"]["kind"]  = "ddim";
    j["sampler"]["steps"] = 50;
    j["sampler"]["eta"]   = 0.0;

    j["control"]["tau_s"]  = 0.85;
    j["control"]["tau_a"]  = 0.05;
    j["control"]["cutoff"] = 0.6;

    j["drf"]["enabled"]        = true;
    j["drf"]["omega"]          = 2.0;
    j["drf"]["lambda"]         = 0.25;
    j["drf"]["rho"]            = 0.001;
    j["drf"]["k"]              = 5.0;
    j["drf"]["N"]              = 3;
    j["drf"]["window_skip"]    = 5;
    j["drf"]["window_len"]     = 20;
    j["drf"]["weight_kind"]    = "exponential";
    j["drf"]["distance"]       = "squared_l2_mean";
    j["drf"]["gradient_mode"]  = "full_vjp";
    j["drf"]["inversion_mode"] = "ratio_matched";

    j["task"]["shape"]             = "disk";
    j["task"]["pos_x"]             = 7.5;
    j["task"]["pos_y"]             = 7.5;
    j["task"]["rotation"]          = 0.0;
    j["task"]["size"]              = 5.0;
    j["task"]["palette_mean"]      = {0.55, -0.35, 0.15};
    j["task"]["palette_std"]       = {1.25, 1.25, 1.25};
    j["task"]["texture_amplitude"] = 0.5;
    j["task"]["gen_label"]         = 0;
    j["task"]["app_label"]         = 1;
    j["task"]["canvas"]            = 16;
    j["task"]["channels"]          = 3;

    j["bench"]["axis"]       = "drf";
    j["bench"]["seeds"]      = 50;
    j["bench"]["workers"]    = 1;
    j["bench"]["iterations"] = {1, 2, 3, 4, 5, 6};
    j["bench"]["windows"]    = {10, 20, 50};
    j["bench"]["af_rho"]     = 3.0;

    j["metrics"]["theta_s"] = 0.7;
    j["metrics"]["theta_a"] = 0.5;
    j["metrics"]["patch"]   = 4;

    j["io"]["out_dir"]     = "out";
    j["io"]["write_ppm"]   = true;
    j["io"]["write_trace"] = true;
    j["io"]["write_plots"] = true;

    j["gradcheck"]["instances"] = 100;
    j["gradcheck"]["tolerance"] = 1e-4;
    j["gradcheck"]["seed"]      = 1234;
    return j;
}

[[noreturn]] void toml_fail(const std::string& origin, int line, const std::string& msg) {
    throw ConfigError(origin + ":" + std::to_string(line) + ": " + msg);
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

// Strips a trailing comment that is not inside a string literal.
std::string strip_comment(const std::string& s) {
    bool in_str = false;
    for (size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"' && (i == 0 || s[i - 1] != '\\')) in_str = !in_str;
        if (s[i] == '#' && !in_str) return s.substr(0, i);
    }
    return s;
}

nlohmann::json parse_toml_value(const std::string& raw, const std::string& origin, int line);

nlohmann::json parse_toml_array(const std::string& raw, const std::string& origin, int line) {
    nlohmann::json arr = nlohmann::json::array();
    std::string body   = trim(raw.substr(1, raw.size() - 2));
    if (body.empty()) return arr;
    size_t start = 0;
    bool in_str  = false;
    for (size_t i = 0; i <= body.size(); ++i) {
        if (i < body.size() && body[i] == '"' && (i == 0 || body[i - 1] != '\\')) in_str = !in_str;
        if (i == body.size() || (body[i] == ',' && !in_str)) {
            const std::string item = trim(body.substr(start, i - start));
            if (item.empty()) toml_fail(origin, line, "empty array element");
            arr.push_back(parse_toml_value(item, origin, line));
            start = i + 1;
        }
    }
    return arr;
}

nlohmann::json parse_toml_value(const std::string& raw, const std::string& origin, int line) {
    if (raw.empty()) toml_fail(origin, line, "missing value");
    if (raw.front() == '[') {
        if (raw.back() != ']') toml_fail(origin, line, "unterminated array");
        return parse_toml_array(raw, origin, line);
    }
    if (raw.front() == '"') {
        if (raw.size() < 2 || raw.back() != '"') toml_fail(origin, line, "unterminated string");
        std::string out;
        for (size_t i = 1; i + 1 < raw.size(); ++i) {
            if (raw[i] == '\\' && i + 2 < raw.size()) {
                ++i;
                switch (raw[i]) {
                    case 'n': out += '\n'; break;
                    case 't': out += '\t'; break;
                    case '"': out += '"'; break;
                    case '\\': out += '\\'; break;
                    default: toml_fail(origin, line, "unsupported escape");
                }
            } else {
                out += raw[i];
            }
        }
        return out;
    }
    if (raw == "true") return true;
    if (raw == "false") return false;

    // Integer, then float.
    {
        int64_t v{};
        auto [p, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), v);
        if (ec == std::errc() && p == raw.data() + raw.size()) return v;
    }
    try {
        size_t pos = 0;
        const double v = std::stod(raw, &pos);
        if (pos == raw.size()) return v;
    } catch (...) {
    }
    toml_fail(origin, line, "cannot parse value '" + raw + "'");
}

bool valid_key_part(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') return false;
    return true;
}

std::vector<std::string> split_key(const std::string& key, const std::string& origin, int line) {
    std::vector<std::string> parts;
    std::stringstream ss(key);
    std::string part;
    while (std::getline(ss, part, '.')) {
        part = trim(part);
        if (!valid_key_part(part)) toml_fail(origin, line, "bad key '" + key + "'");
        parts.push_back(part);
    }
    if (parts.empty()) toml_fail(origin, line, "empty key");
    return parts;
}

void insert_path(nlohmann::json& root, const std::vector<std::string>& parts,
                 nlohmann::json value) {
    nlohmann::json* node = &root;
    for (size_t i = 0; i + 1 < parts.size(); ++i) node = &(*node)[parts[i]];
    (*node)[parts.back()] = std::move(value);
}

// Every known key is present in the default tree; anything else is a typo.
void check_known_keys(const nlohmann::json& patch, const nlohmann::json& defaults,
                      const std::string& prefix) {
    for (const auto& [key, value] : patch.items()) {
        const std::string path = prefix.empty() ? key : prefix + "." + key;
        if (path == "bench.variants") continue;  // machine-generated plan list
        if (!defaults.contains(key)) throw ConfigError("unknown config key '" + path + "'");
        if (value.is_object()) {
            if (!defaults.at(key).is_object())
                throw ConfigError("config key '" + path + "' is not a section");
            check_known_keys(value, defaults.at(key), path);
        }
    }
}

double get_num(const nlohmann::json& j, const std::string& path) {
    const nlohmann::json* node = &j;
    std::stringstream ss(path);
    std::string part;
    while (std::getline(ss, part, '.')) node = &node->at(part);
    if (!node->is_number()) throw ConfigError("config key '" + path + "' must be a number");
    return node->get<double>();
}

int64_t get_int(const nlohmann::json& j, const std::string& path) {
    const nlohmann::json* node = &j;
    std::stringstream ss(path);
    std::string part;
    while (std::getline(ss, part, '.')) node = &node->at(part);
    if (!node->is_number_integer()) throw ConfigError("config key '" + path + "' must be an integer");
    return node->get<int64_t>();
}

std::string get_str(const nlohmann::json& j, const std::string& path) {
    const nlohmann::json* node = &j;
    std::stringstream ss(path);
    std::string part;
    while (std::getline(ss, part, '.')) node = &node->at(part);
    if (!node->is_string()) throw ConfigError("config key '" + path + "' must be a string");
    return node->get<std::string>();
}

bool get_bool(const nlohmann::json& j, const std::string& path) {
    const nlohmann::json* node = &j;
    std::stringstream ss(path);
    std::string part;
    while (std::getline(ss, part, '.')) node = &node->at(part);
    if (!node->is_boolean()) throw ConfigError("config key '" + path + "' must be a boolean");
    return node->get<bool>();
}

}  // namespace

nlohmann::json parse_toml(const std::string& text, const std::string& origin) {
    nlohmann::json root = nlohmann::json::object();
    std::vector<std::string> section;

    std::stringstream ss(text);
    std::string raw;
    int lineno = 0;
    while (std::getline(ss, raw)) {
        ++lineno;
        std::string line = trim(strip_comment(raw));
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']') toml_fail(origin, lineno, "unterminated section header");
            section = split_key(trim(line.substr(1, line.size() - 2)), origin, lineno);
            continue;
        }

        // key = value, where the '=' must sit outside any string literal
        size_t eq   = std::string::npos;
        bool in_str = false;
        for (size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) in_str = !in_str;
            if (line[i] == '=' && !in_str) {
                eq = i;
                break;
            }
        }
        if (eq == std::string::npos) toml_fail(origin, lineno, "expected key = value");

        auto parts = split_key(trim(line.substr(0, eq)), origin, lineno);
        std::vector<std::string> full = section;
        full.insert(full.end(), parts.begin(), parts.end());
        insert_path(root, full, parse_toml_value(trim(line.substr(eq + 1)), origin, lineno));
    }
    return root;
}

nlohmann::json parse_scalar(const std::string& text) {
    const std::string raw = trim(text);
    if (raw.empty()) throw ConfigError("--set: empty value");
    if (raw.front() == '[' || raw.front() == '"') return parse_toml_value(raw, "<set>", 0);
    if (raw == "true") return true;
    if (raw == "false") return false;
    {
        int64_t v{};
        auto [p, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), v);
        if (ec == std::errc() && p == raw.data() + raw.size()) return v;
    }
    try {
        size_t pos     = 0;
        const double v = std::stod(raw, &pos);
        if (pos == raw.size()) return v;
    } catch (...) {
    }
    return raw;  // bare string
}

uint64_t fnv1a64(const std::string& bytes) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

RunConfig::RunConfig() : store_(default_store()) {}

void RunConfig::merge(const nlohmann::json& patch, const std::string& origin) {
    try {
        check_known_keys(patch, default_store(), "");
    } catch (const ConfigError& e) {
        throw ConfigError(origin + ": " + e.what());
    }
    store_.merge_patch(patch);
}

void RunConfig::load_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read config file '" + path + "'");
    std::stringstream buf;
    buf << is.rdbuf();
    if (path.size() > 5 && path.substr(path.size() - 5) == ".json")
        load_json_text(buf.str(), path);
    else
        load_toml_text(buf.str(), path);
}

void RunConfig::load_toml_text(const std::string& text, const std::string& origin) {
    merge(parse_toml(text, origin), origin);
}

void RunConfig::load_json_text(const std::string& text, const std::string& origin) {
    nlohmann::json patch;
    try {
        patch = nlohmann::json::parse(text);
    } catch (const std::exception& e) {
        throw ConfigError(origin + ": bad json: " + e.what());
    }
    if (!patch.is_object()) throw ConfigError(origin + ": top-level json must be an object");
    merge(patch, origin);
}

void RunConfig::set_override(const std::string& dotted_key, const std::string& value) {
    nlohmann::json patch;
    insert_path(patch, split_key(dotted_key, "<set>", 0), parse_scalar(value));
    merge(patch, "--set " + dotted_key);
}

void RunConfig::set_value(const std::string& dotted_key, const nlohmann::json& value) {
    nlohmann::json patch;
    insert_path(patch, split_key(dotted_key, "<set>", 0), value);
    merge(patch, "set " + dotted_key);
}

std::string RunConfig::hash() const {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(store_.dump())));
    return buf;
}

std::string RunConfig::dump(int indent) const { return store_.dump(indent); }

NoiseSchedule ResolvedConfig::make_noise_schedule() const {
    return make_schedule(schedule_kind, t_train, beta_min, beta_max);
}

StepGrid ResolvedConfig::make_grid(const NoiseSchedule& sched) const {
    return make_step_grid(sched, steps, spacing);
}

ResolvedConfig RunConfig::resolve() const {
    const nlohmann::json& j = store_;
    ResolvedConfig r;

    {
        const int64_t seed = get_int(j, "seed");
        if (seed < 0) throw ConfigError("seed must be >= 0");
        r.seed = uint64_t(seed);
    }

    const std::string sk = get_str(j, "schedule.kind");
    if (sk == "linear")
        r.schedule_kind = ScheduleKind::linear;
    else if (sk == "cosine")
        r.schedule_kind = ScheduleKind::cosine;
    else
        throw ConfigError("schedule.kind: unknown value '" + sk + "'");
    r.t_train  = int(get_int(j, "schedule.t_train"));
    r.beta_min = get_num(j, "schedule.beta_min");
    r.beta_max = get_num(j, "schedule.beta_max");
    const std::string sp = get_str(j, "schedule.spacing");
    if (sp == "uniform")
        r.spacing = GridSpacing::uniform;
    else if (sp == "trailing")
        r.spacing = GridSpacing::trailing;
    else
        throw ConfigError("schedule.spacing: unknown value '" + sp + "'");

    r.model.kind = get_str(j, "model.kind");
    if (r.model.kind != "gaussian_mixture" && r.model.kind != "toy_denoiser")
        throw ConfigError("model.kind: unknown value '" + r.model.kind + "'");
    r.model.weights      = get_str(j, "model.weights");
    r.model.hidden       = int(get_int(j, "model.hidden"));
    r.model.train_epochs = int(get_int(j, "model.train_epochs"));
    r.model.train_lr     = get_num(j, "model.train_lr");

    r.sampler_kind = sampler_kind_from_string(get_str(j, "sampler.kind"));
    r.steps        = int(get_int(j, "sampler.steps"));
    r.eta          = get_num(j, "sampler.eta");
    if (r.eta < 0.0 || r.eta > 1.0) throw ConfigError("sampler.eta must be in [0,1]");

    r.tau_s  = get_num(j, "control.tau_s");
    r.tau_a  = get_num(j, "control.tau_a");
    r.cutoff = get_num(j, "control.cutoff");

    r.drf_enabled        = get_bool(j, "drf.enabled");
    r.drf.omega          = get_num(j, "drf.omega");
    r.drf.lambda         = get_num(j, "drf.lambda");
    r.drf.rho            = get_num(j, "drf.rho");
    r.drf.k              = get_num(j, "drf.k");
    r.drf.iterations     = int(get_int(j, "drf.N"));
    r.drf.window_skip    = int(get_int(j, "drf.window_skip"));
    r.drf.window_len     = int(get_int(j, "drf.window_len"));
    r.drf.weight_kind    = weight_kind_from_string(get_str(j, "drf.weight_kind"));
    r.drf.distance_kind  = distance_kind_from_string(get_str(j, "drf.distance"));
    r.drf.gradient_mode  = gradient_mode_from_string(get_str(j, "drf.gradient_mode"));
    r.drf.inversion_mode = inversion_mode_from_string(get_str(j, "drf.inversion_mode"));

    r.task.shape    = shape_kind_from_string(get_str(j, "task.shape"));
    r.task.pos_x    = get_num(j, "task.pos_x");
    r.task.pos_y    = get_num(j, "task.pos_y");
    r.task.rotation = get_num(j, "task.rotation");
    r.task.size     = get_num(j, "task.size");
    {
        const auto& pm = j.at("task").at("palette_mean");
        const auto& ps = j.at("task").at("palette_std");
        if (!pm.is_array() || pm.size() != 3) throw ConfigError("task.palette_mean must have 3 entries");
        if (!ps.is_array() || ps.size() != 3) throw ConfigError("task.palette_std must have 3 entries");
        for (int c = 0; c < 3; ++c) {
            r.task.palette_mean[size_t(c)] = pm[size_t(c)].get<double>();
            r.task.palette_std[size_t(c)]  = ps[size_t(c)].get<double>();
        }
    }
    r.task.texture_amplitude = get_num(j, "task.texture_amplitude");
    r.task.gen_label         = int(get_int(j, "task.gen_label"));
    r.task.app_label         = int(get_int(j, "task.app_label"));
    r.task.canvas            = int(get_int(j, "task.canvas"));
    r.task.channels          = int(get_int(j, "task.channels"));
    r.task.seed              = r.seed;

    r.bench.axis = get_str(j, "bench.axis");
    {
        bool axis_ok = false;
        for (const char* allowed : {"none", "drf", "af_only", "iterations", "window", "weight",
                                    "sampler", "gradient_mode"})
            axis_ok = axis_ok || r.bench.axis == allowed;
        if (!axis_ok) throw ConfigError("bench.axis: unknown value '" + r.bench.axis + "'");
    }
    r.bench.seeds   = int(get_int(j, "bench.seeds"));
    r.bench.workers = int(get_int(j, "bench.workers"));
    if (r.bench.seeds < 1) throw ConfigError("bench.seeds must be >= 1");
    if (r.bench.workers < 1) throw ConfigError("bench.workers must be >= 1");
    r.bench.iterations.clear();
    for (const auto& v : j.at("bench").at("iterations")) r.bench.iterations.push_back(v.get<int>());
    r.bench.windows.clear();
    for (const auto& v : j.at("bench").at("windows")) r.bench.windows.push_back(v.get<int>());
    r.bench.af_rho = get_num(j, "bench.af_rho");
    if (j.at("bench").contains("variants")) {
        for (const auto& v : j.at("bench").at("variants")) {
            if (!v.is_object() || !v.contains("name") || !v.contains("set"))
                throw ConfigError("bench.variants entries need 'name' and 'set'");
            r.bench.variants.emplace_back(v.at("name").get<std::string>(), v.at("set"));
        }
    }

    r.thresholds.theta_s = get_num(j, "metrics.theta_s");
    r.thresholds.theta_a = get_num(j, "metrics.theta_a");
    r.patch              = int(get_int(j, "metrics.patch"));

    r.io.out_dir     = get_str(j, "io.out_dir");
    r.io.write_ppm   = get_bool(j, "io.write_ppm");
    r.io.write_trace = get_bool(j, "io.write_trace");
    r.io.write_plots = get_bool(j, "io.write_plots");

    r.gradcheck.instances = int(get_int(j, "gradcheck.instances"));
    r.gradcheck.tolerance = get_num(j, "gradcheck.tolerance");
    r.gradcheck.seed      = uint64_t(get_int(j, "gradcheck.seed"));
    if (r.gradcheck.instances < 1) throw ConfigError("gradcheck.instances must be >= 1");

    // Cross-field checks: everything below must hold before a run starts.
    const NoiseSchedule sched = r.make_noise_schedule();
    const StepGrid grid       = r.make_grid(sched);
    r.drf.validate(grid.steps());
    r.task.validate();
    if (r.tau_s < 0.0 || r.tau_s > 1.0) throw ConfigError("control.tau_s must be in [0,1]");
    if (r.tau_a < 0.0 || r.tau_a > 1.0) throw ConfigError("control.tau_a must be in [0,1]");
    if (r.cutoff < 0.0 || r.cutoff > 1.0) throw ConfigError("control.cutoff must be in [0,1]");
    if (r.task.canvas % r.patch != 0)
        throw ConfigError("metrics.patch must divide task.canvas");
    if (r.model.hidden < 1) throw ConfigError("model.hidden must be >= 1");
    if (r.model.train_epochs < 1) throw ConfigError("model.train_epochs must be >= 1");
    if (!(r.model.train_lr > 0.0)) throw ConfigError("model.train_lr must be > 0");

    r.hash = hash();
    return r;
}

}  // namespace drf
