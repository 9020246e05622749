#pragma once

// Numerical evaluation of the overlap amplitudes
//   C^{l1,l2}_{p1,p2} = \int dq_s dq_i Phi(q_s,q_i) LG*_{p1,l1}(q_s) LG*_{p2,l2}(q_i).
//
// Two independent routes:
//  * reduced3d: the global rotation angle is integrated analytically (factor
//    2 pi and the selection rule l1 + l2 = l0); what remains is the radial pair
//    (rho_s, rho_i) and the relative angle psi. The psi integral is done once
//    per radial node pair for all needed harmonics, so whole tables of
//    amplitudes share the expensive part.
//  * brute4d: plain tensor-product quadrature over (rho_s, phi_s, rho_i, phi_i).
//
// All integrals run in scaled units (spatial frequencies times sqrt(L/k_p)),
// so only NormalizedParams::a and ::b enter.

#include <complex>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "spiral/physics.hpp"

namespace spiral {

struct QuadratureConfig {
    int radial_points = 32;    // Gauss-Legendre nodes per panel
    int radial_panels = 8;     // panels on [0, radial cutoff] at the first level
    int angular_points = 64;   // minimum trapezoid points; raised per node pair as needed
    double radial_cutoff = 0;  // scaled units; 0 selects it from the mode content
    double rel_tolerance = 1e-6;
    int refinement_max = 3;    // number of allowed doublings
    int jobs = 1;              // worker threads

    /// Throws ConfigError when a field violates its invariant.
    void validate() const;

    /// Smaller grid suited to the O(N^4) tensor-product route.
    static QuadratureConfig brute_default();
};

enum class Method { reduced3d, brute4d, closed_form };

std::string_view to_string(Method m);

struct Amplitude {
    cplx value{0.0, 0.0};
    Method method = Method::reduced3d;
    double error_estimate = 0.0; // last relative change for quadrature, 0 for closed form
};

/// Gauss-Legendre rule on [-1, 1].
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights);

/// Composite Gauss-Legendre rule on [0, upper].
struct RadialRule {
    std::vector<double> nodes;
    std::vector<double> weights;

    static RadialRule composite(double upper, int panels, int points);
    std::size_t size() const { return nodes.size(); }
};

/// Radius (scaled units) beyond which every analysis mode with |l| <= l_abs_max
/// and p <= p_max is negligible (amplitude below ~1e-15 of its peak).
double auto_radial_cutoff(const NormalizedParams& params, int l_abs_max, int p_max);

/// Trapezoid points needed in psi at a radial node pair so that harmonics up to
/// `harmonic_max` are resolved; `level` doubles the count per refinement.
int angular_points_for(const NormalizedParams& params, int l0, double rho_s, double rho_i,
                       int harmonic_max, int minimum, int level);

/// Phi(q_s, q_i) in scaled units for a single LG_0^{l0} pump with unit
/// coefficient. Identical to mode_function_phi(q_s, q_i, PumpSpec::single(l0),
/// params.scaled_pump_width(), 1.0) but without per-call allocation.
class ScaledIntegrand {
public:
    ScaledIntegrand(const NormalizedParams& params, int l0);

    cplx operator()(Vec2 q_s, Vec2 q_i) const;
    /// Everything except the winding factor (Q_x +- i Q_y)^|l0|, given
    /// |Q|^2 = |q_s + q_i|^2 and |Delta|^2 = |q_s - q_i|^2.
    cplx envelope(double q2, double d2) const;
    /// Upper bound on |Phi| when |q_s| = rho_s, |q_i| = rho_i (natural log).
    double log_bound(double rho_s, double rho_i) const;

private:
    int l0_;
    double b_;
    double pump_log_norm_;
    cplx pump_phase_;
};

/// Amplitudes C^{l1, l0-l1}_{p1,p2} for l1 in [l_lo, l_hi] and p1, p2 <= p_max.
class AmplitudeTable {
public:
    AmplitudeTable() = default;
    AmplitudeTable(int l0, int l_lo, int l_hi, int p_max);

    int l0() const { return l0_; }
    int l_lo() const { return l_lo_; }
    int l_hi() const { return l_hi_; }
    int p_max() const { return p_max_; }

    Amplitude& at(int l1, int p1, int p2);
    const Amplitude& at(int l1, int p1, int p2) const;

    /// Largest per-entry relative change of the last refinement.
    double error_estimate() const { return error_estimate_; }
    void set_error_estimate(double e) { error_estimate_ = e; }

private:
    std::size_t index(int l1, int p1, int p2) const;

    int l0_ = 0;
    int l_lo_ = 0;
    int l_hi_ = -1;
    int p_max_ = 0;
    double error_estimate_ = 0.0;
    std::vector<Amplitude> entries_;
};

/// Reduced 3D route for one amplitude. Selection-rule violations return an
/// exact zero without integrating. Throws ConvergenceError.
Amplitude amplitude_reduced(const ModePair& pair, const NormalizedParams& params, int l0,
                            const QuadratureConfig& cfg);

/// Reduced 3D route for a whole table, refined until every entry above the
/// 1e-12 floor changes by less than cfg.rel_tolerance (relative).
AmplitudeTable amplitude_table(const NormalizedParams& params, int l0, int l_lo, int l_hi, int p_max,
                               const QuadratureConfig& cfg);

/// Brute-force 4D tensor-product route; oracle use only (|l| <= 6, p <= 4).
Amplitude amplitude_brute(const ModePair& pair, const NormalizedParams& params, int l0,
                          const QuadratureConfig& cfg);

/// Brute-force route for several pairs sharing one pump; the integrand is
/// evaluated once per grid point for all pairs.
std::vector<Amplitude> amplitude_brute_batch(std::span<const ModePair> pairs, const NormalizedParams& params,
                                             int l0, const QuadratureConfig& cfg);

/// sum_{|l1| <= l_max} sum_{p1,p2 <= p_max} |C|^2 with l2 = l0 - l1.
double state_norm(const NormalizedParams& params, int l0, const QuadratureConfig& cfg, int l_max, int p_max);

/// Plane integral of |W|^2 in scaled units (exact value 4). Radial quadrature
/// in u = |delta|^2/4 over `periods` half-periods of sin^2 plus the analytic
/// 1/(2U) tail.
double phase_match_norm(int periods = 4000, int points_per_period = 12);

/// 4D tensor-product quadrature of |Phi|^2 over (Q, Delta) = (q_s+q_i, q_s-q_i)
/// with Jacobian 1/4 (exact value 1 for a normalized pump).
double phi_norm(const NormalizedParams& params, const PumpSpec& pump, int periods = 400);

/// Runs body(i) for i in [0, n) on `jobs` threads with static chunking.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& body);

} // namespace spiral
