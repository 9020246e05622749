#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "spiral/closed_form.hpp"
#include "spiral/errors.hpp"
#include "spiral/quadrature.hpp"

using namespace spiral;

namespace {

double rel(cplx x, cplx ref) { return std::abs(x - ref) / std::max(std::abs(ref), 1e-12); }

const NormalizedParams kUnit = NormalizedParams::from_normalized(1.0, 1.0);

} // namespace

TEST_CASE("gauss legendre is exact for polynomials") {
    std::vector<double> x, w;
    gauss_legendre(7, x, w);
    for (int deg = 0; deg <= 13; ++deg) {
        double s = 0.0;
        for (int i = 0; i < 7; ++i) s += w[i] * std::pow(x[i], deg);
        const double ref = deg % 2 ? 0.0 : 2.0 / (deg + 1);
        CHECK(std::abs(s - ref) < 1e-14);
    }
    gauss_legendre(1, x, w);
    CHECK(x[0] == 0.0);
    CHECK(w[0] == 2.0);
    CHECK_THROWS_AS(gauss_legendre(0, x, w), RangeError);
}

TEST_CASE("composite radial rule") {
    const RadialRule r = RadialRule::composite(3.0, 4, 10);
    CHECK(r.size() == 40);
    double s = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) s += r.weights[i] * std::exp(-r.nodes[i]);
    CHECK(s == doctest::Approx(1.0 - std::exp(-3.0)).epsilon(1e-14));
    CHECK_THROWS_AS(RadialRule::composite(0.0, 1, 1), RangeError);
}

TEST_CASE("config validation") {
    QuadratureConfig c;
    CHECK_NOTHROW(c.validate());
    c.angular_points = 63;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = QuadratureConfig{};
    c.rel_tolerance = 0.5;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = QuadratureConfig{};
    c.radial_panels = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = QuadratureConfig{};
    c.jobs = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("scaled integrand agrees with the pointwise mode function") {
    for (int l0 : {-2, 0, 1, 3}) {
        const NormalizedParams p = NormalizedParams::from_normalized(1.3, 0.8);
        const ScaledIntegrand f(p, l0);
        const Vec2 qs{0.7, -0.2}, qi{-0.4, 0.9};
        const cplx ref = mode_function_phi(qs, qi, PumpSpec::single(l0), p.scaled_pump_width(), 1.0);
        CHECK(rel(f(qs, qi), ref) < 1e-13);
        const double bound = f.log_bound(std::sqrt(qs.norm2()), std::sqrt(qi.norm2()));
        CHECK(std::log(std::abs(ref)) <= bound + 1e-12);
    }
}

TEST_CASE("selection rule short-circuits to exact zero") {
    std::mt19937 rng(7);
    std::uniform_int_distribution<int> l(-5, 5), pp(0, 3);
    int done = 0;
    while (done < 50) {
        const int l1 = l(rng), l2 = l(rng), l0 = l(rng);
        if (l1 + l2 == l0) continue;
        const Amplitude a = amplitude_reduced({ModeIndex(l1, pp(rng)), ModeIndex(l2, pp(rng))}, kUnit, l0, {});
        CHECK(a.value == cplx(0.0, 0.0));
        CHECK(a.error_estimate == 0.0);
        ++done;
    }
}

TEST_CASE("reduced route reproduces the closed form") {
    const AmplitudeTable t = amplitude_table(kUnit, 0, -3, 3, 0, {});
    for (int l1 = -3; l1 <= 3; ++l1) {
        const cplx c = closed_amplitude(ClosedFormInputs(0, l1, -l1, kUnit)).value;
        CHECK(rel(t.at(l1, 0, 0).value, c) < 1e-10);
    }
    const Amplitude single = amplitude_reduced({ModeIndex(2, 0), ModeIndex(-2, 0)}, kUnit, 0, {});
    CHECK(rel(single.value, closed_amplitude(ClosedFormInputs(0, 2, -2, kUnit)).value) < 1e-4);
    CHECK(single.method == Method::reduced3d);
    CHECK(single.error_estimate < 1e-6);
}

TEST_CASE("table entries match single amplitudes") {
    const NormalizedParams p = NormalizedParams::from_normalized(2.5, 1.0);
    const AmplitudeTable t = amplitude_table(p, 1, -1, 2, 2, {});
    for (int l1 : {-1, 2})
        for (int p1 : {0, 2}) {
            const Amplitude a = amplitude_reduced({ModeIndex(l1, p1), ModeIndex(1 - l1, 1)}, p, 1, {});
            CHECK(rel(a.value, t.at(l1, p1, 1).value) < 1e-9);
        }
    CHECK_THROWS_AS(t.at(3, 0, 0), RangeError);
    CHECK_THROWS_AS(t.at(0, 3, 0), RangeError);
}

TEST_CASE("exchange and reflection symmetry of the reduced route") {
    const NormalizedParams p = NormalizedParams::from_normalized(2.5, 1.0);
    const AmplitudeTable t1 = amplitude_table(p, 1, -3, 4, 3, {});
    for (int l1 = -3; l1 <= 4; ++l1)
        for (int p1 = 0; p1 <= 3; ++p1)
            for (int p2 = 0; p2 <= 3; ++p2) CHECK(std::abs(t1.at(l1, p1, p2).value - t1.at(1 - l1, p2, p1).value) < 1e-10);

    const AmplitudeTable t0 = amplitude_table(p, 0, -4, 4, 3, {});
    for (int l1 = 1; l1 <= 4; ++l1)
        for (int p1 = 0; p1 <= 3; ++p1)
            for (int p2 = 0; p2 <= 3; ++p2) CHECK(std::abs(t0.at(l1, p1, p2).value - t0.at(-l1, p1, p2).value) < 1e-10);
}

TEST_CASE("results do not depend on the number of threads") {
    QuadratureConfig one, three;
    three.jobs = 3;
    const AmplitudeTable a = amplitude_table(kUnit, 2, -1, 3, 2, one);
    const AmplitudeTable b = amplitude_table(kUnit, 2, -1, 3, 2, three);
    for (int l1 = -1; l1 <= 3; ++l1)
        for (int p1 = 0; p1 <= 2; ++p1)
            for (int p2 = 0; p2 <= 2; ++p2) CHECK(a.at(l1, p1, p2).value == b.at(l1, p1, p2).value);

    const std::vector<ModePair> pairs = {{ModeIndex(0, 0), ModeIndex(0, 0)}, {ModeIndex(1, 1), ModeIndex(-1, 0)}};
    QuadratureConfig bq = QuadratureConfig::brute_default();
    const auto x = amplitude_brute_batch(pairs, kUnit, 0, bq);
    bq.jobs = 2;
    const auto y = amplitude_brute_batch(pairs, kUnit, 0, bq);
    for (std::size_t i = 0; i < pairs.size(); ++i) CHECK(x[i].value == y[i].value);
}

TEST_CASE("brute force oracle") {
    const std::vector<ModePair> pairs = {
        {ModeIndex(0, 0), ModeIndex(0, 0)}, {ModeIndex(1, 0), ModeIndex(-1, 1)}, {ModeIndex(-1, 1), ModeIndex(1, 0)},
        {ModeIndex(2, 0), ModeIndex(0, 0)}, {ModeIndex(1, 2), ModeIndex(1, 0)},
    };
    const auto b = amplitude_brute_batch(pairs, kUnit, 0, QuadratureConfig::brute_default());
    const AmplitudeTable t = amplitude_table(kUnit, 0, -1, 1, 2, {});
    CHECK(rel(b[0].value, t.at(0, 0, 0).value) < 1e-4);
    CHECK(rel(b[1].value, t.at(1, 0, 1).value) < 1e-4);
    CHECK(std::abs(b[1].value - b[2].value) < 1e-10);
    CHECK(std::abs(b[3].value) < 1e-10);
    CHECK(std::abs(b[4].value) < 1e-10);
    CHECK(b[0].method == Method::brute4d);

    const Amplitude one = amplitude_brute(pairs[0], kUnit, 0, QuadratureConfig::brute_default());
    CHECK(rel(one.value, b[0].value) < 1e-6);
    CHECK_THROWS_AS(amplitude_brute({ModeIndex(7, 0), ModeIndex(-7, 0)}, kUnit, 0, QuadratureConfig::brute_default()),
                    RangeError);
    CHECK_THROWS_AS(amplitude_brute({ModeIndex(0, 5), ModeIndex(0, 0)}, kUnit, 0, QuadratureConfig::brute_default()),
                    RangeError);
}

TEST_CASE("coarse grids raise a convergence error carrying the last estimate") {
    QuadratureConfig coarse;
    coarse.radial_points = 2;
    coarse.radial_panels = 1;
    coarse.refinement_max = 1;
    coarse.rel_tolerance = 1e-9;
    try {
        amplitude_reduced({ModeIndex(0, 0), ModeIndex(0, 0)}, kUnit, 0, coarse);
        FAIL("expected a convergence error");
    } catch (const ConvergenceError& e) {
        CHECK(std::isfinite(e.last_estimate().real()));
        CHECK(e.last_change() > 1e-9);
    }
    CHECK_THROWS_AS(amplitude_table(kUnit, 0, -2, 2, 1, coarse), ConvergenceError);
}

TEST_CASE("state norm") {
    const double n00 = state_norm(kUnit, 0, {}, 0, 0);
    CHECK(n00 > 0.0);
    CHECK(n00 < 1.0);
    double prev = 0.0;
    for (int p = 0; p <= 4; ++p) {
        const double n = state_norm(kUnit, 0, {}, 3, p);
        CHECK(n > prev);
        CHECK(n <= 1.0 + 1e-3);
        prev = n;
    }
    CHECK(state_norm(kUnit, 0, {}, 5, 4) > state_norm(kUnit, 0, {}, 3, 4));
    CHECK_THROWS_AS(state_norm(kUnit, 0, {}, -1, 0), RangeError);
}

TEST_CASE("engine sees only the normalized parameters") {
    PhysicalSetup s1;
    s1.crystal_length = 1e-3;
    s1.pump_wavelength = 0.4e-6;
    s1.pump_width = 30e-6;
    s1.analysis_width = 20e-6;
    PhysicalSetup s2 = s1;
    s2.crystal_length *= 4.0;
    s2.pump_width *= 2.0;
    s2.analysis_width *= 2.0;
    const NormalizedParams p1 = NormalizedParams::from_setup(s1);
    const NormalizedParams p2 = NormalizedParams::from_setup(s2);
    CHECK(p1 == p2);
    const AmplitudeTable a = amplitude_table(p1, 0, -2, 2, 1, {});
    const AmplitudeTable b = amplitude_table(p2, 0, -2, 2, 1, {});
    for (int l1 = -2; l1 <= 2; ++l1)
        for (int p = 0; p <= 1; ++p) CHECK(a.at(l1, p, p).value == b.at(l1, p, p).value);
}

TEST_CASE("angular point count") {
    const int n = angular_points_for(kUnit, 0, 2.0, 2.0, 4, 64, 0);
    CHECK(n >= 64);
    CHECK(n % 4 == 0);
    CHECK(angular_points_for(kUnit, 0, 2.0, 2.0, 4, 64, 1) == 2 * n);
    CHECK(angular_points_for(kUnit, 0, 6.0, 6.0, 4, 64, 0) > n);
    CHECK(auto_radial_cutoff(kUnit, 4, 10) > auto_radial_cutoff(kUnit, 0, 0));
}

TEST_CASE("norm oracles") {
    CHECK(std::abs(phase_match_norm() / 4.0 - 1.0) < 1e-4);
    CHECK(std::abs(phase_match_norm(400, 12) / 4.0 - 1.0) < 1e-4);
}

TEST_CASE("parallel_for forwards exceptions") {
    CHECK_THROWS_AS(parallel_for(10, 3,
                                 [](std::size_t i) {
                                     if (i == 7) throw DomainError("boom");
                                 }),
                    DomainError);
    std::vector<int> hits(10, 0);
    parallel_for(10, 4, [&](std::size_t i) { hits[i] += 1; });
    for (int h : hits) CHECK(h == 1);
}
