#include "spiral/closed_form.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "spiral/errors.hpp"

namespace spiral {

namespace {

double log_factorial(int n) { return std::lgamma(n + 1.0); }

// log |A0| without the sign; L = |l0| + |l1| + |l2|.
double log_a0(int l0a, int l1a, int l2a, double a, double b) {
    const double total = l0a + l1a + l2a;
    return 0.5 * std::log(4.0 * b / kPi) + 0.5 * l0a * std::log(b / a) +
           (0.5 * total + 1.0) * std::log(2.0 * a / (2.0 * b + a)) +
           (0.5 * (l0a - l1a - l2a) + 1.0) * std::log(2.0) -
           0.5 * (log_factorial(l0a) + log_factorial(l1a) + log_factorial(l2a));
}

} // namespace

std::string_view to_string(ClosedFormVariant v) {
    return v == ClosedFormVariant::published ? "published" : "corrected";
}

ClosedFormVariant closed_form_variant_from(std::string_view name) {
    if (name == "corrected") return ClosedFormVariant::corrected;
    if (name == "published") return ClosedFormVariant::published;
    throw ConfigError("unknown closed-form variant '" + std::string(name) + "' (corrected|published)");
}

cplx complex_arctan(cplx z) {
    const cplx i(0.0, 1.0);
    const cplx num = 1.0 + i * z;
    const cplx den = 1.0 - i * z;
    if (std::abs(num) == 0.0 || std::abs(den) == 0.0) throw DomainError("complex_arctan: branch point +-i");
    return std::log(num / den) / (2.0 * i);
}

cplx gamma_sin_term(int n, cplx theta) {
    if (n < 0) throw RangeError("gamma_sin_term: n must be >= 0");
    if (n == 0) return theta;
    return std::exp(std::lgamma(static_cast<double>(n))) * std::sin(static_cast<double>(n) * theta);
}

ClosedFormInputs::ClosedFormInputs(int l0_, int l1_, int l2_, const NormalizedParams& p)
    : l0(l0_), l1(l1_), l2(l2_), params(p) {
    if (l0 != l1 + l2)
        throw ConfigError("closed form: winding numbers must satisfy l0 = l1 + l2 (got " + std::to_string(l0) +
                          " vs " + std::to_string(l1) + " + " + std::to_string(l2) + ")");
    if (!(params.a > 0.0) || !(params.b > 0.0)) throw ConfigError("closed form: widths must be positive");
}

cplx closed_form_theta(const NormalizedParams& params) {
    return complex_arctan(1.0 / cplx(2.0 * params.a, 1.0));
}

Amplitude closed_amplitude(const ClosedFormInputs& in, ClosedFormVariant variant) {
    const double a = in.params.a;
    const double b = in.params.b;
    const int l0a = std::abs(in.l0);
    const int l1a = std::abs(in.l1);
    const int l2a = std::abs(in.l2);
    const int total = l0a + l1a + l2a;
    const cplx theta = closed_form_theta(in.params);
    const double log_amp = log_a0(l0a, l1a, l2a, a, b);
    // (-1)^{|l0|-|l1|-|l2|} is +1 since l0 = l1 + l2 fixes the parity

    const bool opposite = in.l1 * in.l2 < 0;
    // corrected: the single-term form holds for l1 l2 >= 0, the sum for l1 l2 < 0
    const bool single_term = (variant == ClosedFormVariant::corrected) ? !opposite : opposite;
    cplx value;
    if (single_term) {
        value = std::exp(log_amp + std::lgamma(0.5 * total + 1.0)) * theta;
    } else {
        const int m = std::min(l1a, l2a);
        const cplx log_root = std::log(cplx(1.0, 1.0 / a)); // (1 + i/a)^{-n/2} = exp(-n/2 log(..))
        const double log_ratio = std::log((2.0 * b + a) / a);
        cplx sum(0.0, 0.0);
        for (int n = 0; n <= m; ++n) {
            const double log_comb = log_factorial(l1a) + log_factorial(l2a) - log_factorial(l1a - n) -
                                    log_factorial(l2a - n) - 2.0 * log_factorial(n);
            const double log_mag = log_amp + log_comb + n * log_ratio + std::lgamma(0.5 * (total - 2 * n) + 1.0);
            cplx term = std::exp(cplx(log_mag, 0.0) - 0.5 * n * log_root) * gamma_sin_term(n, theta);
            if (variant == ClosedFormVariant::corrected && n % 2 == 1) term = -term;
            sum += term;
        }
        if (variant == ClosedFormVariant::corrected && m % 2 == 1) sum = -sum;
        value = sum;
    }
    return Amplitude{value, Method::closed_form, 0.0};
}

double gamma_bracket(const NormalizedParams& params, ClosedFormVariant variant) {
    const double wp = params.wbar_p;
    const double w0 = params.wbar_0;
    if (variant == ClosedFormVariant::published) return 2.0 * wp / (w0 * (2.0 * wp * wp + 1.0));
    return 2.0 * wp * w0 / (2.0 * wp * wp + w0 * w0);
}

cplx gamma_superposition(const PumpSpec& pump, int n, const NormalizedParams& params, ClosedFormVariant variant) {
    if (n < 0) throw RangeError("gamma_superposition: n must be >= 0");
    for (const auto& c : pump.components())
        if (c.winding < 0 || c.winding % 2 != 0)
            throw ConfigError("gamma_superposition: pump windings must be even and nonnegative (got " +
                              std::to_string(c.winding) + ")");
    const cplx c2n = pump.coefficient(2 * n);
    if (c2n == cplx(0.0, 0.0)) return {0.0, 0.0};
    const double log_mag = 0.5 * log_factorial(2 * n) - log_factorial(n) +
                           (2.0 * n + 2.0) * std::log(gamma_bracket(params, variant));
    return std::exp(log_mag) * c2n;
}

double optimal_analysis_width(double wbar_p, double n_p) {
    if (!(wbar_p > 0.0)) throw ConfigError("optimal_analysis_width: wbar_p must be positive");
    auto weight = [&](double log_w0) {
        const NormalizedParams p = NormalizedParams::from_normalized(wbar_p, std::exp(log_w0), n_p);
        return std::norm(closed_amplitude(ClosedFormInputs(0, 0, 0, p)).value);
    };
    // golden section on log wbar_0; the weight is unimodal in it
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double lo = std::log(1e-2 * std::sqrt(wbar_p)), hi = std::log(1e2 * std::sqrt(wbar_p));
    double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
    double f1 = weight(x1), f2 = weight(x2);
    while (hi - lo > 1e-10) {
        if (f1 < f2) {
            lo = x1, x1 = x2, f1 = f2;
            x2 = lo + g * (hi - lo), f2 = weight(x2);
        } else {
            hi = x2, x2 = x1, f2 = f1;
            x1 = hi - g * (hi - lo), f1 = weight(x1);
        }
    }
    return std::exp(0.5 * (lo + hi));
}

} // namespace spiral
