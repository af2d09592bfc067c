#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sstream>

#include "oracles.hpp"
#include "schedule.hpp"

using namespace drf;

TEST_CASE("linear schedule matches the scalar product oracle") {
    const auto s = make_schedule(ScheduleKind::linear, 1000, 1e-4, 2e-2);
    CHECK(s.alpha_bar(0) == 1.0);                       // empty product
    CHECK(s.alpha_bar(1) == doctest::Approx(0.9999).epsilon(1e-12));
    CHECK(s.betas.front() == doctest::Approx(1e-4));
    CHECK(s.betas.back() == doctest::Approx(2e-2));

    // Running product identity to 1e-12.
    double prod = 1.0;
    for (int t = 1; t <= 1000; ++t) {
        prod *= 1.0 - s.betas[size_t(t) - 1];
        CHECK(std::abs(s.alpha_bar(t) - prod) < 1e-12);
    }
}

TEST_CASE("schedules are strictly decreasing and in (0,1]") {
    for (auto kind : {ScheduleKind::linear, ScheduleKind::cosine}) {
        const auto s = make_schedule(kind, 1000, 1e-4, 2e-2);
        for (int t = 1; t <= 1000; ++t) {
            CHECK(s.alpha_bar(t) > 0.0);
            CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
        }
    }
    const auto cosine = make_schedule(ScheduleKind::cosine, 1000, 0, 0);
    CHECK(cosine.alpha_bar(1000) < 0.01);

    // Cosine profile check by direct evaluation at a few interior points.
    const double offs = 0.008;
    auto profile = [&](double t) {
        const double x = (t / 1000.0 + offs) / (1.0 + offs) * M_PI / 2.0;
        return std::cos(x) * std::cos(x);
    };
    for (int t : {100, 400, 700}) {
        const double expected = profile(t) / profile(0);
        CHECK(cosine.alpha_bar(t) == doctest::Approx(expected).epsilon(1e-6));
    }
}

TEST_CASE("make_schedule is deterministic") {
    const auto a = make_schedule(ScheduleKind::linear, 500, 1e-4, 2e-2);
    const auto b = make_schedule(ScheduleKind::linear, 500, 1e-4, 2e-2);
    CHECK(a.alpha_bars == b.alpha_bars);
    CHECK(a.betas == b.betas);
}

TEST_CASE("make_schedule rejects bad bounds") {
    CHECK_THROWS_AS(make_schedule(ScheduleKind::linear, 1, 1e-4, 2e-2), ConfigError);
    CHECK_THROWS_AS(make_schedule(ScheduleKind::linear, 100, 0.0, 2e-2), ConfigError);
    CHECK_THROWS_AS(make_schedule(ScheduleKind::linear, 100, 0.03, 2e-2), ConfigError);
    CHECK_THROWS_AS(make_schedule(ScheduleKind::linear, 100, 1e-4, 1.0), ConfigError);
}

TEST_CASE("forward_diffuse") {
    const auto s = make_schedule(ScheduleKind::linear, 1000, 1e-4, 2e-2);

    Latent z0 = Latent::flat(3);
    z0[0] = 1.0, z0[1] = -2.0, z0[2] = 0.5;
    Latent eps = Latent::flat(3);
    eps[0] = 2.0, eps[1] = 0.0, eps[2] = -1.0;

    SUBCASE("identity at zero noise") {
        const Latent out = forward_diffuse(z0, 0, eps, s);
        for (int i = 0; i < 3; ++i) CHECK(out[i] == z0[i]);
    }

    SUBCASE("scalar hand computation") {
        // abar = 0.25: 0.5 * 1.0 + sqrt(0.75) * 2.0
        const auto synth = schedule_from_alpha_bars({1.0, 0.25, 0.1});
        Latent a = Latent::flat(1), e = Latent::flat(1);
        a[0] = 1.0;
        e[0] = 2.0;
        const Latent out = forward_diffuse(a, 1, e, synth);
        CHECK(out[0] == doctest::Approx(2.232050807568877).epsilon(1e-12));
    }

    SUBCASE("zero-noise scaling") {
        Latent zero = Latent::flat(3);
        const Latent out = forward_diffuse(z0, 700, zero, s);
        const double sab = std::sqrt(s.alpha_bar(700));
        for (int i = 0; i < 3; ++i) CHECK(out[i] == doctest::Approx(sab * z0[i]));
    }

    SUBCASE("shape mismatch") {
        CHECK_THROWS_AS(forward_diffuse(z0, 10, Latent::flat(4), s), DimensionError);
    }
}

TEST_CASE("step grids") {
    const auto s = make_schedule(ScheduleKind::linear, 1000, 1e-4, 2e-2);

    SUBCASE("full grid") {
        const auto g = make_step_grid(s, 1000, GridSpacing::uniform);
        CHECK(g.steps() == 1000);
        CHECK(g.at(0) == 999);
        CHECK(g.at(999) == 0);
        for (int i = 1; i < 1000; ++i) CHECK(g.at(i) == g.at(i - 1) - 1);
    }

    SUBCASE("degenerate grid takes the largest timestep") {
        const auto g = make_step_grid(s, 1, GridSpacing::uniform);
        CHECK(g.steps() == 1);
        CHECK(g.at(0) == 999);
        CHECK(g.prev(0) == 0);
    }

    SUBCASE("uniform spacing has integer gap 20 at 50 steps") {
        const auto g = make_step_grid(s, 50, GridSpacing::uniform);
        CHECK(g.steps() == 50);
        CHECK(g.at(0) == 999);
        for (int i = 1; i < 50; ++i) CHECK(g.at(i - 1) - g.at(i) == 20);
    }

    SUBCASE("trailing spacing is valid and descending") {
        for (int steps : {1, 7, 50, 333}) {
            const auto g = make_step_grid(s, steps, GridSpacing::trailing);
            CHECK(g.steps() == steps);
            CHECK(g.at(0) == 999);
            for (int i = 1; i < steps; ++i) CHECK(g.at(i) < g.at(i - 1));
            CHECK(g.at(steps - 1) >= 0);
        }
    }

    SUBCASE("adjacent ratios lie in (0,1)") {
        for (auto spacing : {GridSpacing::uniform, GridSpacing::trailing}) {
            const auto g = make_step_grid(s, 50, spacing);
            for (int i = 1; i < g.steps(); ++i) {
                const double r = s.alpha_bar(g.at(i - 1)) / s.alpha_bar(g.at(i));
                CHECK(r > 0.0);
                CHECK(r < 1.0);
            }
        }
    }

    SUBCASE("step count out of range") {
        CHECK_THROWS_AS(make_step_grid(s, 0, GridSpacing::uniform), ConfigError);
        CHECK_THROWS_AS(make_step_grid(s, 1001, GridSpacing::uniform), ConfigError);
    }
}

TEST_CASE("ratio coefficients compose to the direct marginal") {
    // abar_t == (abar_t / abar_prev) * abar_prev over every adjacent pair.
    const auto s = make_schedule(ScheduleKind::linear, 1000, 1e-4, 2e-2);
    const auto g = make_step_grid(s, 50, GridSpacing::uniform);
    for (int i = 0; i < g.steps(); ++i) {
        const int t      = g.at(i);
        const int t_prev = g.prev(i);
        const double r   = s.step_ratio(t, t_prev);
        CHECK(std::abs(r * s.alpha_bar(t_prev) - s.alpha_bar(t)) < 1e-12);
    }
}

TEST_CASE("csv dump") {
    const auto s = make_schedule(ScheduleKind::linear, 10, 1e-4, 2e-2);
    std::ostringstream os;
    dump_schedule_csv(s, os);
    const std::string text = os.str();
    CHECK(text.rfind("t,beta,alpha_bar\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 12);  // header + 11 rows
    CHECK(text.find("0,0,1\n") != std::string::npos);
}
