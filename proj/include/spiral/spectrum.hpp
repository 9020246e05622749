#pragma once

// Spiral spectrum P_{l1,l2}, cumulative radial weights, the p1 = p2 = 0
// restricted state and its Schmidt-type summaries (entropy, Schmidt number,
// coverage bandwidth).

#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "spiral/closed_form.hpp"
#include "spiral/physics.hpp"
#include "spiral/quadrature.hpp"

namespace spiral {

using WindingPair = std::pair<int, int>; // (l1, l2)

struct SpiralSpectrum {
    std::map<WindingPair, double> entries; // P_{l1,l2} summed over p1, p2 <= p_max
    int l_max = 0;
    int p_max = 0;
    double captured_norm = 0.0;
    NormalizedParams params;
    std::vector<int> pump_windings;
};

/// P_{l1,l2} for l1 in [-l_max, l_max], l2 = l0 - l1.
SpiralSpectrum spiral_spectrum(const NormalizedParams& params, int l0, int l_max, int p_max,
                               const QuadratureConfig& cfg);

/// Superposition pump: different windings never share an (l1, l2) cell, so
/// each component contributes |C_m|^2 times its own spectrum.
SpiralSpectrum spiral_spectrum(const NormalizedParams& params, const PumpSpec& pump, int l_max, int p_max,
                               const QuadratureConfig& cfg);

/// Entry k is sum_{p1,p2 <= k} P^{l1,l2}_{p1,p2}, k = 0..p_max, pump LG_0^{l1+l2}.
std::vector<double> cumulative_p_weight(int l1, int l2, int p_max, const NormalizedParams& params,
                                        const QuadratureConfig& cfg);

enum class CoefficientSource { closed_form, quadrature };

struct RestrictedOptions {
    CoefficientSource source = CoefficientSource::closed_form;
    ClosedFormVariant variant = ClosedFormVariant::corrected;
    QuadratureConfig quadrature{};
    bool renormalize = true;
    /// Norm of the full state the subspace is compared against. The
    /// two-photon state has unit norm, so 1 is exact.
    double reference_norm = 1.0;
};

struct RestrictedState {
    std::map<WindingPair, cplx> coefficients; // C^{l1,l2}_{0,0}
    bool renormalized = false;
    double subspace_fraction = 0.0;  // raw sum |C|^2 / reference_norm
    std::optional<int> l_max;        // unset for states built by hand
    double captured_weight = 0.0;    // raw sum |C|^2 before renormalization
};

/// p1 = p2 = 0 subspace with l1 in [-l_max, l_max].
RestrictedState restricted_state(const NormalizedParams& params, int l0, int l_max,
                                 const RestrictedOptions& opts = {});
RestrictedState restricted_state(const NormalizedParams& params, const PumpSpec& pump, int l_max,
                                 const RestrictedOptions& opts = {});

/// Builds a renormalized state from explicit coefficients (l_max unset).
RestrictedState state_from_coefficients(std::map<WindingPair, cplx> coefficients);

/// Normalized Schmidt weights, descending. A single pump winding makes the
/// coefficient matrix one entry per row and column, so the weights are the
/// |C|^2 themselves; otherwise an SVD of the coefficient matrix is used.
/// Weights below 1e-14 are dropped.
std::vector<double> schmidt_weights(const RestrictedState& state);

/// Schmidt weights of the whole truncated state (all p1, p2 <= p_max) for a
/// single LG_0^{l0} pump: the state is block diagonal in l1, each block is
/// a (p_max+1)^2 matrix handled by SVD.
std::vector<double> full_state_schmidt_weights(const NormalizedParams& params, int l0, int l_max, int p_max,
                                               const QuadratureConfig& cfg);

/// -sum w log2 w over weights that sum to 1.
double entropy_bits(std::span<const double> weights);
/// 1 / sum w^2.
double participation_number(std::span<const double> weights);

/// Entropy of entanglement in bits. DomainError when the state is empty or
/// not renormalized.
double entanglement_entropy(const RestrictedState& state);
double schmidt_number(const RestrictedState& state);

/// Smallest number of cells whose largest weights cover `coverage` of the
/// captured weight. Ties go to smaller |l1 - l2|, then smaller l1.
/// TruncationError when the outermost rows (|l1| = l_max) alone carry more
/// than 1 - coverage of the captured weight, since the window could then
/// extend past the truncation.
int spiral_bandwidth(const SpiralSpectrum& s, double coverage = 0.99);
int spiral_bandwidth(const RestrictedState& state, double coverage = 0.99);

} // namespace spiral
