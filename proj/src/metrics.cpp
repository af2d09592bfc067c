#include "metrics.hpp"

#include <cmath>
#include <vector>

namespace drf {

double mask_iou(const Latent& a, const Latent& b) {
    require_same_shape(a, b, "mask_iou");
    long inter = 0, uni = 0;
    for (int i = 0; i < a.size(); ++i) {
        const bool pa = a[i] != 0.0;
        const bool pb = b[i] != 0.0;
        inter += pa && pb;
        uni += pa || pb;
    }
    return uni == 0 ? 1.0 : double(inter) / double(uni);
}

double appearance_stat_distance(const Latent& gen, const Latent& app) {
    require_same_shape(gen, app, "appearance_stat_distance");
    double s = 0.0;
    for (int c = 0; c < gen.channels; ++c) {
        const double dm = channel_mean(gen, c) - channel_mean(app, c);
        const double ds = channel_std(gen, c) - channel_std(app, c);
        s += dm * dm + ds * ds;
    }
    return std::sqrt(s);
}

double patch_self_similarity_distance(const Latent& gen, const Latent& struct_ref, int patch) {
    require_same_shape(gen, struct_ref, "patch_self_similarity_distance");
    if (patch < 1 || gen.height % patch != 0 || gen.width % patch != 0)
        throw ConfigError("metrics.patch must divide the spatial dims, got " + std::to_string(patch));

    const int py = gen.height / patch;
    const int px = gen.width / patch;
    const int n  = py * px;
    const int d  = gen.channels * patch * patch;

    auto patch_vectors = [&](const Latent& z) {
        std::vector<std::vector<double>> vs(static_cast<size_t>(n),
                                            std::vector<double>(static_cast<size_t>(d)));
        for (int by = 0; by < py; ++by)
            for (int bx = 0; bx < px; ++bx) {
                auto& v = vs[size_t(by) * px + bx];
                int idx = 0;
                for (int c = 0; c < z.channels; ++c)
                    for (int y = 0; y < patch; ++y)
                        for (int x = 0; x < patch; ++x)
                            v[size_t(idx++)] = z.at(c, by * patch + y, bx * patch + x);
                double norm = 0.0;
                for (double e : v) norm += e * e;
                norm = std::sqrt(norm);
                if (norm > 0.0)
                    for (double& e : v) e /= norm;
            }
        return vs;
    };

    const auto va = patch_vectors(gen);
    const auto vb = patch_vectors(struct_ref);

    double fro = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double ga = 0.0, gb = 0.0;
            for (int k = 0; k < d; ++k) {
                ga += va[size_t(i)][size_t(k)] * va[size_t(j)][size_t(k)];
                gb += vb[size_t(i)][size_t(k)] * vb[size_t(j)][size_t(k)];
            }
            const double diff = ga - gb;
            fro += diff * diff;
        }
    return std::sqrt(fro);
}

MetricReport evaluate_metrics(const Latent& out, const ControlContext& ctx, int patch,
                              const MetricThresholds& th) {
    MetricReport r;
    r.struct_iou    = mask_iou(threshold_mask(out), ctx.structure_mask);
    r.app_stat_dist = appearance_stat_distance(out, ctx.z0_appearance);
    r.self_sim_dist = patch_self_similarity_distance(out, ctx.z0_structure, patch);
    r.success       = r.struct_iou >= th.theta_s && r.app_stat_dist <= th.theta_a;
    return r;
}

}  // namespace drf
