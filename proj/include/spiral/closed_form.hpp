#pragma once

// Analytic amplitudes C^{l1,l2}_{0,0} for an LG_0^{l0} pump, and the
// |n,n> amplitudes generated by a superposition of even-winding pumps.

#include "spiral/physics.hpp"
#include "spiral/quadrature.hpp"

namespace spiral {

/// corrected: the form that agrees with the overlap integral on every branch
/// (default). published: the formulas exactly as printed, kept for
/// comparison. They differ whenever l1 and l2 are both nonzero; see README.
enum class ClosedFormVariant { corrected, published };

std::string_view to_string(ClosedFormVariant v);
/// Accepts "corrected" or "published"; ConfigError otherwise.
ClosedFormVariant closed_form_variant_from(std::string_view name);

/// arctan(z) = (1/2i) ln((1 + iz)/(1 - iz)), principal branch.
/// Throws DomainError at z = +-i.
cplx complex_arctan(cplx z);

/// Gamma(n) sin(n theta) for n >= 1, theta itself for n = 0.
cplx gamma_sin_term(int n, cplx theta);

struct ClosedFormInputs {
    int l0 = 0;
    int l1 = 0;
    int l2 = 0;
    NormalizedParams params;

    /// Throws ConfigError unless l0 == l1 + l2 and a, b > 0.
    ClosedFormInputs(int l0, int l1, int l2, const NormalizedParams& params);
};

/// theta = arctan(1/(i + 2a)); 2a = w0^2 k_p / (2L).
cplx closed_form_theta(const NormalizedParams& params);

Amplitude closed_amplitude(const ClosedFormInputs& in, ClosedFormVariant variant = ClosedFormVariant::corrected);

/// Bracket raised to 2n+2 in gamma_n. published: 2 wp/(w0 (2 wp^2 + 1));
/// corrected: 2 wp w0/(2 wp^2 + w0^2). They coincide at w0 = 1.
double gamma_bracket(const NormalizedParams& params, ClosedFormVariant variant);

/// gamma_n = sqrt((2n)!)/n! * bracket^{2n+2} * C_{2n}. The state sum_n gamma_n |n,n>
/// is defined up to an n-independent factor. ConfigError on odd windings.
cplx gamma_superposition(const PumpSpec& pump, int n, const NormalizedParams& params,
                         ClosedFormVariant variant = ClosedFormVariant::corrected);

/// Analysis width wbar_0 maximizing P^{0,0}_{0,0} for a Gaussian pump of
/// width wbar_p. The radial sums converge fastest there.
double optimal_analysis_width(double wbar_p, double n_p = 1.0);

} // namespace spiral
