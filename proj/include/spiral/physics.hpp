#pragma once

// Pointwise building blocks of the down-converted two-photon mode function:
// Laguerre polynomials, Laguerre-Gaussian modes in the spatial-frequency
// domain, the pump profile, and the longitudinal phase-matching function.

#include <complex>
#include <span>
#include <vector>

namespace spiral {

using cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;

/// Transverse spatial-frequency vector (Cartesian).
struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend Vec2 operator+(Vec2 u, Vec2 v) { return {u.x + v.x, u.y + v.y}; }
    friend Vec2 operator-(Vec2 u, Vec2 v) { return {u.x - v.x, u.y - v.y}; }
    double norm2() const { return x * x + y * y; }
};

/// Polar form of a transverse spatial frequency; rho >= 0.
struct TransversePoint {
    double rho = 0.0;
    double phi = 0.0;

    TransversePoint() = default;
    TransversePoint(double rho, double phi);

    Vec2 cartesian() const;
    static TransversePoint from(Vec2 q);
};

/// Laguerre-Gaussian mode index: winding number l, radial index p >= 0.
struct ModeIndex {
    int l = 0;
    int p = 0;

    ModeIndex() = default;
    ModeIndex(int l, int p);

    friend bool operator==(const ModeIndex&, const ModeIndex&) = default;
};

/// Signal and idler mode indices.
struct ModePair {
    ModeIndex signal;
    ModeIndex idler;

    ModePair swapped() const { return {idler, signal}; }
    friend bool operator==(const ModePair&, const ModePair&) = default;
};

struct PumpComponent {
    int winding = 0;
    cplx coeff{1.0, 0.0};
};

/// Pump transverse profile as a superposition sum_m C_m LG_0^m with
/// sum |C_m|^2 = 1 and distinct windings.
class PumpSpec {
public:
    /// Single LG_0^{l0} pump with unit coefficient.
    static PumpSpec single(int l0);
    /// Throws ConfigError unless the coefficients are normalized to 1e-9.
    static PumpSpec superposition(std::vector<PumpComponent> components);
    /// Rescales the coefficients to unit norm.
    static PumpSpec normalized(std::vector<PumpComponent> components);

    const std::vector<PumpComponent>& components() const { return components_; }
    cplx coefficient(int winding) const;
    bool is_single() const { return components_.size() == 1; }
    int max_abs_winding() const;

private:
    explicit PumpSpec(std::vector<PumpComponent> components);
    std::vector<PumpComponent> components_;
};

/// Dimensional description of a down-conversion experiment. Lengths in any
/// consistent unit (the CLI uses metres).
struct PhysicalSetup {
    double crystal_length = 0.0;   // L
    double pump_wavelength = 0.0;  // vacuum wavelength lambda_p
    double refractive_index = 1.0; // n_p
    double pump_width = 0.0;       // w_p
    double analysis_width = 0.0;   // w_0 of the detection LG basis
    PumpSpec pump = PumpSpec::single(0);

    /// k_p = 2 pi n_p / lambda_p
    double pump_wavenumber() const;
    /// Throws ConfigError when any invariant is violated.
    void validate() const;

    struct Validity {
        double figure = 0.0; // pi n_p wbar_p
        bool satisfied = false;
    };
    /// The thin-crystal model needs pi n_p wbar_p >> 1; `satisfied` compares
    /// against kValidityThreshold.
    Validity validity() const;
};

inline constexpr double kValidityThreshold = 10.0;

/// The dimensionless combinations that fully determine every amplitude.
/// a = w0^2 k_p / (4L), b = w_p^2 k_p / (4L). In the scaled unit system used
/// by the integrators (spatial frequencies multiplied by sqrt(L/k_p)) the
/// analysis modes have width 2 sqrt(a), the pump 2 sqrt(b), and L/k_p = 1.
struct NormalizedParams {
    double wbar_p = 0.0;
    double wbar_0 = 0.0;
    double n_p = 1.0;
    double a = 0.0;
    double b = 0.0;

    static NormalizedParams from_setup(const PhysicalSetup& setup);
    static NormalizedParams from_normalized(double wbar_p, double wbar_0, double n_p = 1.0);

    double scaled_analysis_width() const;
    double scaled_pump_width() const;

    friend bool operator==(const NormalizedParams&, const NormalizedParams&) = default;
};

/// sin(x)/x with sinc(0) = 1.
double sinc(double x);

/// Generalized Laguerre polynomial L_p^alpha(x) by upward three-term
/// recurrence. Supported range 0 <= p, alpha <= 200.
double laguerre_poly(int p, int alpha, double x);

/// Fills out[0..p_max] with L_0^alpha(x) .. L_{p_max}^alpha(x).
void laguerre_sequence(int alpha, double x, std::span<double> out);

/// exp(i (p - |l|/2) pi) evaluated exactly.
cplx lg_constant_phase(int l, int p);

/// LG_p^l in the spatial-frequency domain, unit L2 norm over the plane.
cplx lg_mode(ModeIndex mode, double w0, TransversePoint pt);
cplx lg_mode(ModeIndex mode, double w0, Vec2 q);

/// E_0(q) = sum_m C_m LG_0^m(q; w_p).
cplx pump_profile(const PumpSpec& pump, double w_p, Vec2 q);
cplx pump_profile(const PhysicalSetup& setup, TransversePoint pt);

/// Phase-matching function with u = |delta|^2 L/(4 k_p):
/// W = sqrt(2 L/(pi^2 k_p)) sinc(u) exp(-i u).
cplx phase_match_W(Vec2 delta, double length_over_kp);
cplx phase_match_W(Vec2 delta, const PhysicalSetup& setup);

/// Phi(q_s, q_i) = E_0(q_s + q_i) W(q_s - q_i).
cplx mode_function_phi(Vec2 q_s, Vec2 q_i, const PumpSpec& pump, double w_p, double length_over_kp);
cplx mode_function_phi(Vec2 q_s, Vec2 q_i, const PhysicalSetup& setup);

} // namespace spiral
