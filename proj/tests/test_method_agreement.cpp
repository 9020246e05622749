#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "spiral/quadrature.hpp"

using namespace spiral;

// Reduced route against the 4D tensor-product route on every pair with
// |l| <= 3, p <= 2. Negative pump windings follow from l0 >= 0 by the
// reflection phi -> -phi, which maps C^{l1,l2}(l0) onto C^{-l1,-l2}(-l0).
TEST_CASE("reduced and brute force routes agree") {
    for (double wp : {1.0, 2.5})
        for (double w0 : {1.0, 2.5}) {
            const NormalizedParams p = NormalizedParams::from_normalized(wp, w0);
            for (int l0 = 0; l0 <= 6; ++l0) {
                CAPTURE(wp);
                CAPTURE(w0);
                CAPTURE(l0);
                std::vector<ModePair> pairs;
                for (int l1 = -3; l1 <= 3; ++l1)
                    if (std::abs(l0 - l1) <= 3)
                        for (int p1 = 0; p1 <= 2; ++p1)
                            for (int p2 = 0; p2 <= 2; ++p2) pairs.push_back({ModeIndex(l1, p1), ModeIndex(l0 - l1, p2)});
                const auto brute = amplitude_brute_batch(pairs, p, l0, QuadratureConfig::brute_default());
                const int lo = std::max(-3, l0 - 3), hi = std::min(3, l0 + 3);
                const AmplitudeTable t = amplitude_table(p, l0, lo, hi, 2, {});
                for (std::size_t i = 0; i < pairs.size(); ++i) {
                    const cplx r = t.at(pairs[i].signal.l, pairs[i].signal.p, pairs[i].idler.p).value;
                    CHECK(std::abs(r - brute[i].value) / std::abs(brute[i].value) < 1e-4);
                }
            }
        }
}

TEST_CASE("reflection to negative pump windings") {
    const NormalizedParams p = NormalizedParams::from_normalized(2.5, 1.0);
    const AmplitudeTable pos = amplitude_table(p, 2, -2, 4, 2, {});
    const AmplitudeTable neg = amplitude_table(p, -2, -4, 2, 2, {});
    for (int l1 = -2; l1 <= 4; ++l1)
        for (int p1 = 0; p1 <= 2; ++p1)
            for (int p2 = 0; p2 <= 2; ++p2) CHECK(std::abs(pos.at(l1, p1, p2).value - neg.at(-l1, p1, p2).value) < 1e-10);

    const std::vector<ModePair> pairs = {{ModeIndex(-3, 1), ModeIndex(1, 2)}, {ModeIndex(-1, 0), ModeIndex(-1, 0)}};
    const auto b = amplitude_brute_batch(pairs, p, -2, QuadratureConfig::brute_default());
    CHECK(std::abs(b[0].value - pos.at(3, 1, 2).value) / std::abs(b[0].value) < 1e-4);
    CHECK(std::abs(b[1].value - pos.at(1, 0, 0).value) / std::abs(b[1].value) < 1e-4);
}
