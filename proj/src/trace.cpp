#include "trace.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace drf {

namespace {

// Shortest round-trippable double; keeps traces byte-reproducible.
std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void RunTrace::record_step(int index, int t, int t_prev, const Latent& z, const Latent& eps_hat) {
    StepRecord r;
    r.index  = index;
    r.t      = t;
    r.t_prev = t_prev;
    r.latent_mean = mean_of(z);
    double s = 0, mn = z.size() ? z[0] : 0, mx = mn;
    for (double v : z.data) {
        const double d = v - r.latent_mean;
        s += d * d;
        mn = std::min(mn, v);
        mx = std::max(mx, v);
    }
    r.latent_std = z.size() ? std::sqrt(s / z.size()) : 0;
    r.latent_min = mn;
    r.latent_max = mx;
    r.eps_norm   = l2_norm(eps_hat);
    steps.push_back(r);
}

void RunTrace::write_jsonl(std::ostream& os) const {
    os << "{\"kind\":\"run\",\"seed\":" << seed << ",\"config_hash\":\"" << config_hash
       << "\",\"drf_refine_calls\":" << drf_refine_calls << "}\n";
    for (const auto& r : steps) {
        os << "{\"kind\":\"step\",\"index\":" << r.index << ",\"t\":" << r.t
           << ",\"t_prev\":" << r.t_prev << ",\"mean\":" << num(r.latent_mean)
           << ",\"std\":" << num(r.latent_std) << ",\"min\":" << num(r.latent_min)
           << ",\"max\":" << num(r.latent_max) << ",\"eps_norm\":" << num(r.eps_norm) << "}\n";
    }
    for (const auto& r : drf_iters) {
        os << "{\"kind\":\"drf\",\"t\":" << r.t << ",\"i\":" << r.iteration
           << ",\"L_app\":" << num(r.loss_app)
           << ",\"L_gen\":" << (r.loss_gen ? num(*r.loss_gen) : "null")
           << ",\"w\":" << num(r.weight) << ",\"L_drf\":" << num(r.loss_drf)
           << ",\"eps_norm\":" << num(r.eps_norm) << ",\"grad_norm\":" << num(r.grad_norm)
           << "}\n";
    }
}

void RunTrace::write_summary_csv(std::ostream& os) const {
    os << "index,t,t_prev,mean,std,min,max,eps_norm\n";
    for (const auto& r : steps) {
        os << r.index << ',' << r.t << ',' << r.t_prev << ',' << num(r.latent_mean) << ','
           << num(r.latent_std) << ',' << num(r.latent_min) << ',' << num(r.latent_max) << ','
           << num(r.eps_norm) << "\n";
    }
}

bool operator==(const StepRecord& a, const StepRecord& b) {
    return a.index == b.index && a.t == b.t && a.t_prev == b.t_prev &&
           a.latent_mean == b.latent_mean && a.latent_std == b.latent_std &&
           a.latent_min == b.latent_min && a.latent_max == b.latent_max &&
           a.eps_norm == b.eps_norm;
}

bool operator==(const DrfIterRecord& a, const DrfIterRecord& b) {
    return a.t == b.t && a.iteration == b.iteration && a.loss_app == b.loss_app &&
           a.loss_gen == b.loss_gen && a.weight == b.weight && a.loss_drf == b.loss_drf &&
           a.eps_norm == b.eps_norm && a.grad_norm == b.grad_norm;
}

bool RunTrace::operator==(const RunTrace& o) const {
    return seed == o.seed && config_hash == o.config_hash && steps == o.steps &&
           drf_iters == o.drf_iters && drf_refine_calls == o.drf_refine_calls;
}

}  // namespace drf
