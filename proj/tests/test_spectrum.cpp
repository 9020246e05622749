#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "spiral/closed_form.hpp"
#include "spiral/errors.hpp"
#include "spiral/spectrum.hpp"

using namespace spiral;

namespace {

const NormalizedParams kUnit = NormalizedParams::from_normalized(1.0, 1.0);

RestrictedState equal_modes(int d, double phase = 0.0) {
    std::map<WindingPair, cplx> c;
    for (int k = 0; k < d; ++k) c[{k, -k}] = std::polar(1.0, phase + 0.3 * k);
    return state_from_coefficients(c);
}

} // namespace

TEST_CASE("spectrum layout and symmetry") {
    const NormalizedParams p = NormalizedParams::from_normalized(2.0, 1.0);
    const SpiralSpectrum s = spiral_spectrum(p, 0, 4, 3, {});
    CHECK(s.entries.size() == 9);
    CHECK(s.l_max == 4);
    CHECK(s.p_max == 3);
    double sum = 0.0;
    for (const auto& [k, w] : s.entries) {
        CHECK(k.first + k.second == 0);
        CHECK(w >= 0.0);
        sum += w;
    }
    CHECK(sum == doctest::Approx(s.captured_norm).epsilon(1e-14));
    CHECK(s.captured_norm <= 1.0 + 1e-3);
    for (int l = 1; l <= 4; ++l) CHECK(std::abs(s.entries.at({l, -l}) - s.entries.at({-l, l})) < 1e-8);

    const SpiralSpectrum s1 = spiral_spectrum(p, 1, 3, 1, {});
    for (const auto& [k, w] : s1.entries) CHECK(k.first + k.second == 1);
    CHECK_THROWS_AS(spiral_spectrum(p, 0, -1, 0, {}), RangeError);
}

TEST_CASE("captured norm grows with the truncation") {
    double prev = 0.0;
    for (int p_max : {0, 1, 3}) {
        const double n = spiral_spectrum(kUnit, 0, 3, p_max, {}).captured_norm;
        CHECK(n > prev);
        prev = n;
    }
    CHECK(spiral_spectrum(kUnit, 0, 5, 3, {}).captured_norm > prev);
    CHECK(prev == doctest::Approx(state_norm(kUnit, 0, {}, 3, 3)).epsilon(1e-12));
}

TEST_CASE("spectrum broadens with the pump width") {
    const SpiralSpectrum narrow = spiral_spectrum(kUnit, 0, 12, 4, {});
    const SpiralSpectrum wide = spiral_spectrum(NormalizedParams::from_normalized(5.0, 1.0), 0, 12, 4, {});
    auto width = [](const SpiralSpectrum& s) {
        double m2 = 0.0;
        for (const auto& [k, w] : s.entries) m2 += w * k.first * k.first;
        return m2 / s.captured_norm;
    };
    CHECK(width(wide) > width(narrow));
}

TEST_CASE("superposition pump spectrum is the weighted sum") {
    const PumpSpec pump = PumpSpec::normalized({{0, {1.0, 0.0}}, {2, {0.0, 2.0}}});
    const SpiralSpectrum s = spiral_spectrum(kUnit, pump, 3, 1, {});
    const SpiralSpectrum s0 = spiral_spectrum(kUnit, 0, 3, 1, {});
    const SpiralSpectrum s2 = spiral_spectrum(kUnit, 2, 3, 1, {});
    CHECK(s.entries.size() == 14);
    CHECK(std::abs(s.entries.at({1, -1}) - 0.2 * s0.entries.at({1, -1})) < 1e-14);
    CHECK(std::abs(s.entries.at({1, 1}) - 0.8 * s2.entries.at({1, 1})) < 1e-14);
    CHECK(s.captured_norm == doctest::Approx(0.2 * s0.captured_norm + 0.8 * s2.captured_norm).epsilon(1e-12));
    CHECK(s.pump_windings == std::vector<int>{0, 2});
}

TEST_CASE("cumulative radial weight") {
    const std::vector<double> c = cumulative_p_weight(0, 0, 8, kUnit, {});
    CHECK(c.size() == 9);
    const double p00 = std::norm(closed_amplitude(ClosedFormInputs(0, 0, 0, kUnit)).value);
    CHECK(std::abs(c[0] - p00) < 1e-8);
    for (std::size_t k = 1; k < c.size(); ++k) CHECK(c[k] >= c[k - 1]);
    const SpiralSpectrum s = spiral_spectrum(kUnit, 0, 0, 8, {});
    CHECK(std::abs(c.back() - s.entries.at({0, 0})) < 1e-12);

    const std::vector<double> c1 = cumulative_p_weight(2, -1, 3, kUnit, {});
    CHECK(std::abs(c1[0] - std::norm(closed_amplitude(ClosedFormInputs(1, 2, -1, kUnit)).value)) < 1e-8);
    CHECK_THROWS_AS(cumulative_p_weight(0, 0, -1, kUnit, {}), RangeError);
}

TEST_CASE("optimal analysis width") {
    std::vector<double> w;
    for (int i = 0; i < 30; ++i) {
        const double w0 = 0.2 + 2.8 * i / 29.0;
        w.push_back(std::norm(closed_amplitude(ClosedFormInputs(0, 0, 0, NormalizedParams::from_normalized(1.0, w0))).value));
    }
    const auto it = std::max_element(w.begin(), w.end());
    CHECK(it != w.begin());
    CHECK(it != w.end() - 1);
}

TEST_CASE("restricted subspace") {
    for (int l0 : {0, 1, 2}) {
        const RestrictedState r = restricted_state(kUnit, l0, 10);
        CHECK(r.renormalized);
        CHECK(r.subspace_fraction > 0.40);
        CHECK(r.l_max == 10);
        double sum = 0.0;
        for (const auto& [k, c] : r.coefficients) {
            CHECK(k.first + k.second == l0);
            sum += std::norm(c);
        }
        CHECK(std::abs(sum - 1.0) < 1e-10);
        CHECK(r.subspace_fraction == doctest::Approx(r.captured_weight));
    }

    RestrictedOptions raw;
    raw.renormalize = false;
    const RestrictedState r1 = restricted_state(kUnit, 1, 6, raw);
    CHECK_FALSE(r1.renormalized);
    const double top = std::norm(r1.coefficients.at({0, 1}));
    CHECK(std::norm(r1.coefficients.at({1, 0})) == doctest::Approx(top));
    for (const auto& [k, c] : r1.coefficients) CHECK(std::norm(c) <= top * (1 + 1e-12));

    RestrictedOptions quad;
    quad.source = CoefficientSource::quadrature;
    const RestrictedState a = restricted_state(kUnit, 2, 4);
    const RestrictedState b = restricted_state(kUnit, 2, 4, quad);
    for (const auto& [k, c] : a.coefficients) CHECK(std::abs(c - b.coefficients.at(k)) < 1e-8);
}

TEST_CASE("entropy and Schmidt number of simple states") {
    const RestrictedState one = state_from_coefficients({{{3, -3}, cplx(0.0, 2.0)}});
    CHECK(entanglement_entropy(one) == 0.0);
    CHECK(schmidt_number(one) == 1.0);
    CHECK(spiral_bandwidth(one, 0.5) == 1);
    CHECK(spiral_bandwidth(one, 0.999) == 1);

    CHECK(entanglement_entropy(equal_modes(4)) == doctest::Approx(2.0).epsilon(1e-14));
    for (int d : {2, 3, 7, 16}) {
        CHECK(std::abs(entanglement_entropy(equal_modes(d)) - std::log2(double(d))) < 1e-12);
        CHECK(schmidt_number(equal_modes(d)) == doctest::Approx(double(d)).epsilon(1e-12));
    }
    CHECK_THROWS_AS(entanglement_entropy(RestrictedState{}), DomainError);
    RestrictedState raw = equal_modes(3);
    raw.renormalized = false;
    CHECK_THROWS_AS(entanglement_entropy(raw), DomainError);
    CHECK_THROWS_AS(schmidt_number(raw), DomainError);
}

TEST_CASE("entropy invariances") {
    const RestrictedState r = restricted_state(NormalizedParams::from_normalized(2.0, 1.0), 1, 8);
    std::map<WindingPair, cplx> rotated, swapped;
    for (const auto& [k, c] : r.coefficients) {
        rotated[k] = c * std::polar(1.0, 1.234);
        swapped[{k.second, k.first}] = c;
    }
    const double e = entanglement_entropy(r);
    CHECK(std::abs(entanglement_entropy(state_from_coefficients(rotated)) - e) < 1e-12);
    CHECK(std::abs(entanglement_entropy(state_from_coefficients(swapped)) - e) < 1e-12);
}

TEST_CASE("Schmidt weights use the SVD when rows share columns") {
    // |0>(|0> + |1>) is a product state
    const RestrictedState prod = state_from_coefficients({{{0, 0}, 1.0}, {{0, 1}, 1.0}});
    const std::vector<double> w = schmidt_weights(prod);
    REQUIRE(w.size() == 1);
    CHECK(w[0] == doctest::Approx(1.0));
    CHECK(entanglement_entropy(prod) < 1e-12);

    const RestrictedState bell = state_from_coefficients({{{0, 0}, 1.0}, {{1, 1}, 1.0}});
    CHECK(entanglement_entropy(bell) == doctest::Approx(1.0));

    // (|0>+|1>)(|0>+|1>)/2 plus nothing else: still a product
    const RestrictedState prod2 =
        state_from_coefficients({{{0, 0}, 1.0}, {{0, 1}, 1.0}, {{1, 0}, 1.0}, {{1, 1}, 1.0}});
    CHECK(entanglement_entropy(prod2) < 1e-12);

    const PumpSpec pump = PumpSpec::normalized({{0, {1.0, 0.0}}, {2, {1.0, 0.0}}});
    const RestrictedState sup = restricted_state(kUnit, pump, 6);
    const std::vector<double> ws = schmidt_weights(sup);
    double sum = 0.0;
    for (std::size_t i = 0; i < ws.size(); ++i) {
        sum += ws[i];
        if (i > 0) CHECK(ws[i] <= ws[i - 1]);
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    const double k = schmidt_number(sup);
    CHECK(k >= 1.0);
    CHECK(k <= double(sup.coefficients.size()));
}

TEST_CASE("entropy and Schmidt number grow with the pump width") {
    double e_prev = 0.0, k_prev = 0.0;
    int bw_prev = 0;
    for (double wp : {1.0, 2.5, 5.0}) {
        const NormalizedParams p = NormalizedParams::from_normalized(wp, 1.0);
        const RestrictedState r = restricted_state(p, 0, 10);
        const double e = entanglement_entropy(r);
        const double k = schmidt_number(r);
        CHECK(e > e_prev);
        CHECK(k > k_prev);
        CHECK(k >= 1.0);
        CHECK(k <= double(r.coefficients.size()));
        const int bw = spiral_bandwidth(restricted_state(p, 0, 40));
        CHECK(bw > bw_prev);
        e_prev = e, k_prev = k, bw_prev = bw;
    }
}

TEST_CASE("spiral bandwidth") {
    const RestrictedState r = restricted_state(kUnit, 0, 30);
    int prev = 0;
    for (double cov : {0.3, 0.5, 0.9, 0.99, 0.999}) {
        const int bw = spiral_bandwidth(r, cov);
        CHECK(bw >= prev);
        prev = bw;
    }
    CHECK(spiral_bandwidth(restricted_state(kUnit, 2, 30)) >= spiral_bandwidth(r));
    CHECK_THROWS_AS(spiral_bandwidth(r, 0.0), RangeError);
    CHECK_THROWS_AS(spiral_bandwidth(r, 1.0), RangeError);

    const RestrictedState cut = restricted_state(NormalizedParams::from_normalized(5.0, 1.0), 0, 1);
    try {
        spiral_bandwidth(cut, 0.99);
        FAIL("expected a truncation error");
    } catch (const TruncationError& e) {
        CHECK(e.achieved_fraction() > 0.0);
        CHECK(e.achieved_fraction() < 0.99);
    }

    const SpiralSpectrum s = spiral_spectrum(kUnit, 0, 8, 2, {});
    const int b1 = spiral_bandwidth(s, 0.9);
    CHECK(b1 >= 1);
    CHECK(spiral_bandwidth(s, 0.99) >= b1);
}

TEST_CASE("full state Schmidt weights") {
    const std::vector<double> w0 = full_state_schmidt_weights(kUnit, 0, 0, 0, {});
    REQUIRE(w0.size() == 1);
    CHECK(w0[0] == doctest::Approx(1.0));

    const std::vector<double> w = full_state_schmidt_weights(kUnit, 0, 3, 3, {});
    double sum = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        sum += w[i];
        if (i > 0) CHECK(w[i] <= w[i - 1]);
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(w.size() <= 7u * 4u);
    CHECK(entropy_bits(w) > 0.0);
    CHECK(participation_number(w) >= 1.0);
}
