#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "metrics.hpp"
#include "oracles.hpp"
#include "task.hpp"

using namespace drf;

namespace {

Latent mask_from(const std::vector<double>& bits, int h, int w) {
    Latent m(1, h, w);
    m.data = bits;
    return m;
}

}  // namespace

TEST_CASE("mask_iou") {
    SUBCASE("identity is 1") {
        const Latent a = mask_from({1, 0, 1, 1}, 2, 2);
        CHECK(mask_iou(a, a) == 1.0);
    }
    SUBCASE("disjoint nonempty masks give 0") {
        const Latent a = mask_from({1, 0, 0, 0}, 2, 2);
        const Latent b = mask_from({0, 1, 1, 0}, 2, 2);
        CHECK(mask_iou(a, b) == 0.0);
    }
    SUBCASE("left half against full on 16x16 is one half") {
        Latent half(1, 16, 16), full(1, 16, 16);
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 16; ++x) {
                full.at(0, y, x) = 1.0;
                half.at(0, y, x) = x < 8 ? 1.0 : 0.0;
            }
        CHECK(mask_iou(half, full) == doctest::Approx(0.5));
    }
    SUBCASE("both empty counts as 1") {
        const Latent a = mask_from({0, 0, 0, 0}, 2, 2);
        CHECK(mask_iou(a, a) == 1.0);
    }
    SUBCASE("symmetry and monotonicity under intersection growth") {
        const Latent a = mask_from({1, 1, 0, 0}, 2, 2);
        const Latent b = mask_from({1, 0, 1, 0}, 2, 2);
        CHECK(mask_iou(a, b) == mask_iou(b, a));
        const Latent b2 = mask_from({1, 1, 1, 0}, 2, 2);  // grows the overlap
        CHECK(mask_iou(a, b2) >= mask_iou(a, b));
    }
    SUBCASE("shape mismatch") {
        CHECK_THROWS_AS(mask_iou(mask_from({1}, 1, 1), mask_from({1, 0}, 1, 2)), DimensionError);
    }
}

TEST_CASE("appearance_stat_distance") {
    RngStream rng(5);
    const Latent a = gaussian_latent(3, 8, 8, rng);

    SUBCASE("identity is 0") { CHECK(appearance_stat_distance(a, a) == 0.0); }

    SUBCASE("uniform per-channel shift has closed form sqrt(C)*|c|") {
        Latent b       = a;
        const double c = 0.37;
        for (auto& v : b.data) v += c;
        CHECK(appearance_stat_distance(b, a) == doctest::Approx(std::sqrt(3.0) * c).epsilon(1e-9));
        // Strictly positive for any nonzero shift.
        CHECK(appearance_stat_distance(b, a) > 0.0);
    }

    SUBCASE("identical channel permutation leaves the value unchanged") {
        Latent b = gaussian_latent(3, 8, 8, rng);
        auto permute = [](const Latent& z) {
            Latent out = z;
            const int np = z.pixels();
            for (int c = 0; c < 3; ++c)
                for (int p = 0; p < np; ++p)
                    out.data[size_t((c + 1) % 3) * np + p] = z.data[size_t(c) * np + p];
            return out;
        };
        CHECK(appearance_stat_distance(permute(a), permute(b)) ==
              doctest::Approx(appearance_stat_distance(a, b)).epsilon(1e-12));
    }
}

TEST_CASE("patch_self_similarity_distance") {
    RngStream rng(9);
    const Latent a = gaussian_latent(1, 4, 4, rng);

    SUBCASE("identity is 0") { CHECK(patch_self_similarity_distance(a, a, 2) == 0.0); }

    SUBCASE("positive scaling is invisible to the cosine gram") {
        const Latent b = scaled(a, 3.7);
        CHECK(patch_self_similarity_distance(b, a, 2) < 1e-12);
    }

    SUBCASE("hand-computed 2x2 instance") {
        // Four 1x1 patches; normalized single-pixel vectors are the signs.
        Latent g(1, 2, 2), s(1, 2, 2);
        g.data = {1.0, -2.0, 3.0, -4.0};  // signs + - + -
        s.data = {1.0, 2.0, 3.0, 4.0};    // signs + + + +
        // Gram(g)[i][j] = sign_i * sign_j; Gram(s) all ones.
        // Difference has 8 entries of magnitude 2 -> frobenius = sqrt(32).
        CHECK(patch_self_similarity_distance(g, s, 1) == doctest::Approx(std::sqrt(32.0)));
    }

    SUBCASE("invalid patch size") {
        CHECK_THROWS_AS(patch_self_similarity_distance(a, a, 3), ConfigError);
        CHECK_THROWS_AS(patch_self_similarity_distance(a, a, 0), ConfigError);
    }
}

TEST_CASE("metric report thresholds") {
    TaskSpec spec;
    const TaskArtifacts task = generate_task(spec, 0.5, 0.5, 0.6);
    MetricThresholds th;

    // The structure rendering itself: IoU 1, self-sim 0 against itself.
    const MetricReport r = evaluate_metrics(task.ctx.z0_structure, task.ctx, 4, th);
    CHECK(r.struct_iou == 1.0);
    CHECK(r.self_sim_dist == 0.0);
    CHECK(r.app_stat_dist > 0.0);

    // Success needs both gates; the structure image fails the appearance one.
    CHECK(r.success == (r.struct_iou >= th.theta_s && r.app_stat_dist <= th.theta_a));
}
