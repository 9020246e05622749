#include "spiral/physics.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "spiral/errors.hpp"

namespace spiral {

namespace {

constexpr int kMaxLaguerreDegree = 200;
constexpr int kMaxLaguerreOrder = 200;

void check_laguerre_range(int p, int alpha, double x) {
    if (p < 0 || p > kMaxLaguerreDegree)
        throw RangeError("laguerre: degree " + std::to_string(p) + " outside [0, 200]");
    if (alpha < 0 || alpha > kMaxLaguerreOrder)
        throw RangeError("laguerre: order " + std::to_string(alpha) + " outside [0, 200]");
    if (!std::isfinite(x))
        throw DomainError("laguerre: non-finite argument");
}

// (x + i sgn(l) y)^|l| / rho^|l|, i.e. exp(i l phi) without atan2.
cplx winding_phasor(int l, Vec2 q) {
    const double rho = std::sqrt(q.norm2());
    if (l == 0) return {1.0, 0.0};
    if (rho == 0.0) return {1.0, 0.0};
    const cplx unit(q.x / rho, (l > 0 ? q.y : -q.y) / rho);
    cplx acc(1.0, 0.0);
    for (int k = 0; k < std::abs(l); ++k) acc *= unit;
    return acc;
}

// |LG_p^l| radial magnitude, x = rho^2 w0^2 / 2.
double lg_radial(int l_abs, int p, double w0, double x) {
    if (x == 0.0 && l_abs > 0) return 0.0;
    double log_mag = 0.5 * (std::log(w0 * w0 / (2.0 * kPi)) + std::lgamma(p + 1.0) -
                            std::lgamma(l_abs + p + 1.0)) -
                     0.5 * x;
    if (l_abs > 0) log_mag += 0.5 * l_abs * std::log(x);
    return std::exp(log_mag) * laguerre_poly(p, l_abs, x);
}

} // namespace

TransversePoint::TransversePoint(double rho_, double phi_) : rho(rho_), phi(phi_) {
    if (!(rho >= 0.0)) throw DomainError("transverse point: rho must be >= 0");
}

Vec2 TransversePoint::cartesian() const { return {rho * std::cos(phi), rho * std::sin(phi)}; }

TransversePoint TransversePoint::from(Vec2 q) {
    double phi = std::atan2(q.y, q.x);
    if (phi < 0.0) phi += 2.0 * kPi;
    return {std::sqrt(q.norm2()), phi};
}

ModeIndex::ModeIndex(int l_, int p_) : l(l_), p(p_) {
    if (p < 0) throw RangeError("mode index: radial index p must be >= 0");
}

// ---------------------------------------------------------------------------
// Pump specification

PumpSpec::PumpSpec(std::vector<PumpComponent> components) : components_(std::move(components)) {
    if (components_.empty()) throw ConfigError("pump spec: no components");
    std::set<int> seen;
    for (const auto& c : components_) {
        if (!seen.insert(c.winding).second)
            throw ConfigError("pump spec: duplicate winding " + std::to_string(c.winding));
        if (!std::isfinite(c.coeff.real()) || !std::isfinite(c.coeff.imag()))
            throw ConfigError("pump spec: non-finite coefficient");
    }
    std::sort(components_.begin(), components_.end(),
              [](const PumpComponent& u, const PumpComponent& v) { return u.winding < v.winding; });
}

PumpSpec PumpSpec::single(int l0) { return PumpSpec(std::vector<PumpComponent>{PumpComponent{l0, {1.0, 0.0}}}); }

PumpSpec PumpSpec::superposition(std::vector<PumpComponent> components) {
    double total = 0.0;
    for (const auto& c : components) total += std::norm(c.coeff);
    if (std::abs(total - 1.0) > 1e-9)
        throw ConfigError("pump spec: coefficients must satisfy sum |C_m|^2 = 1 (got " +
                          std::to_string(total) + ")");
    return PumpSpec(std::move(components));
}

PumpSpec PumpSpec::normalized(std::vector<PumpComponent> components) {
    double total = 0.0;
    for (const auto& c : components) total += std::norm(c.coeff);
    if (!(total > 0.0)) throw ConfigError("pump spec: all coefficients vanish");
    const double scale = 1.0 / std::sqrt(total);
    for (auto& c : components) c.coeff *= scale;
    return PumpSpec(std::move(components));
}

cplx PumpSpec::coefficient(int winding) const {
    for (const auto& c : components_)
        if (c.winding == winding) return c.coeff;
    return {0.0, 0.0};
}

int PumpSpec::max_abs_winding() const {
    int m = 0;
    for (const auto& c : components_) m = std::max(m, std::abs(c.winding));
    return m;
}

// ---------------------------------------------------------------------------
// Setup and normalized parameters

double PhysicalSetup::pump_wavenumber() const {
    return 2.0 * kPi * refractive_index / pump_wavelength;
}

void PhysicalSetup::validate() const {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v))
            throw ConfigError(std::string("physical setup: ") + name + " must be positive and finite");
    };
    positive(crystal_length, "crystal length");
    positive(pump_wavelength, "pump wavelength");
    positive(pump_width, "pump width");
    positive(analysis_width, "analysis width");
    if (!(refractive_index >= 1.0) || !std::isfinite(refractive_index))
        throw ConfigError("physical setup: refractive index must be >= 1");
}

PhysicalSetup::Validity PhysicalSetup::validity() const {
    const double wbar_p = pump_width / std::sqrt(pump_wavelength * crystal_length);
    const double figure = kPi * refractive_index * wbar_p;
    return {figure, figure >= kValidityThreshold};
}

NormalizedParams NormalizedParams::from_setup(const PhysicalSetup& s) {
    s.validate();
    const double kp = s.pump_wavenumber();
    const double root = std::sqrt(s.pump_wavelength * s.crystal_length);
    NormalizedParams out;
    out.wbar_p = s.pump_width / root;
    out.wbar_0 = s.analysis_width / root;
    out.n_p = s.refractive_index;
    out.a = s.analysis_width * s.analysis_width * kp / (4.0 * s.crystal_length);
    out.b = s.pump_width * s.pump_width * kp / (4.0 * s.crystal_length);
    return out;
}

NormalizedParams NormalizedParams::from_normalized(double wbar_p, double wbar_0, double n_p) {
    if (!(wbar_p > 0.0) || !(wbar_0 > 0.0) || !std::isfinite(wbar_p) || !std::isfinite(wbar_0))
        throw ConfigError("normalized widths must be positive and finite");
    if (!(n_p >= 1.0) || !std::isfinite(n_p)) throw ConfigError("refractive index must be >= 1");
    NormalizedParams out;
    out.wbar_p = wbar_p;
    out.wbar_0 = wbar_0;
    out.n_p = n_p;
    out.a = 0.5 * kPi * n_p * wbar_0 * wbar_0;
    out.b = 0.5 * kPi * n_p * wbar_p * wbar_p;
    return out;
}

double NormalizedParams::scaled_analysis_width() const { return 2.0 * std::sqrt(a); }
double NormalizedParams::scaled_pump_width() const { return 2.0 * std::sqrt(b); }

// ---------------------------------------------------------------------------
// Special functions

double sinc(double x) {
    if (std::abs(x) < 1e-4) {
        const double x2 = x * x;
        return 1.0 - x2 / 6.0 * (1.0 - x2 / 20.0);
    }
    return std::sin(x) / x;
}

double laguerre_poly(int p, int alpha, double x) {
    check_laguerre_range(p, alpha, x);
    double prev = 1.0;
    if (p == 0) return prev;
    double cur = 1.0 + alpha - x;
    for (int k = 1; k < p; ++k) {
        const double next = ((2.0 * k + 1.0 + alpha - x) * cur - (k + alpha) * prev) / (k + 1.0);
        prev = cur;
        cur = next;
    }
    return cur;
}

void laguerre_sequence(int alpha, double x, std::span<double> out) {
    if (out.empty()) return;
    check_laguerre_range(static_cast<int>(out.size()) - 1, alpha, x);
    out[0] = 1.0;
    if (out.size() == 1) return;
    out[1] = 1.0 + alpha - x;
    for (std::size_t k = 1; k + 1 < out.size(); ++k) {
        const double kk = static_cast<double>(k);
        out[k + 1] = ((2.0 * kk + 1.0 + alpha - x) * out[k] - (kk + alpha) * out[k - 1]) / (kk + 1.0);
    }
}

cplx lg_constant_phase(int l, int p) {
    // (-1)^p (-i)^|l|
    static constexpr cplx kPowers[4] = {{1.0, 0.0}, {0.0, -1.0}, {-1.0, 0.0}, {0.0, 1.0}};
    const cplx base = kPowers[std::abs(l) % 4];
    return (p % 2 == 0) ? base : -base;
}

// ---------------------------------------------------------------------------
// Mode functions

cplx lg_mode(ModeIndex mode, double w0, TransversePoint pt) {
    if (!(w0 > 0.0)) throw DomainError("lg_mode: width must be positive");
    const int l_abs = std::abs(mode.l);
    const double x = 0.5 * pt.rho * pt.rho * w0 * w0;
    const double radial = lg_radial(l_abs, mode.p, w0, x);
    return radial * std::polar(1.0, mode.l * pt.phi) * lg_constant_phase(mode.l, mode.p);
}

cplx lg_mode(ModeIndex mode, double w0, Vec2 q) {
    if (!(w0 > 0.0)) throw DomainError("lg_mode: width must be positive");
    const int l_abs = std::abs(mode.l);
    const double x = 0.5 * q.norm2() * w0 * w0;
    const double radial = lg_radial(l_abs, mode.p, w0, x);
    return radial * winding_phasor(mode.l, q) * lg_constant_phase(mode.l, mode.p);
}

cplx pump_profile(const PumpSpec& pump, double w_p, Vec2 q) {
    cplx total(0.0, 0.0);
    for (const auto& c : pump.components()) total += c.coeff * lg_mode(ModeIndex(c.winding, 0), w_p, q);
    return total;
}

cplx pump_profile(const PhysicalSetup& setup, TransversePoint pt) {
    return pump_profile(setup.pump, setup.pump_width, pt.cartesian());
}

cplx phase_match_W(Vec2 delta, double length_over_kp) {
    const double u = 0.25 * delta.norm2() * length_over_kp;
    const double amplitude = std::sqrt(2.0 * length_over_kp) / kPi;
    return amplitude * sinc(u) * cplx(std::cos(u), -std::sin(u));
}

cplx phase_match_W(Vec2 delta, const PhysicalSetup& setup) {
    return phase_match_W(delta, setup.crystal_length / setup.pump_wavenumber());
}

cplx mode_function_phi(Vec2 q_s, Vec2 q_i, const PumpSpec& pump, double w_p, double length_over_kp) {
    return pump_profile(pump, w_p, q_s + q_i) * phase_match_W(q_s - q_i, length_over_kp);
}

cplx mode_function_phi(Vec2 q_s, Vec2 q_i, const PhysicalSetup& setup) {
    return mode_function_phi(q_s, q_i, setup.pump, setup.pump_width,
                             setup.crystal_length / setup.pump_wavenumber());
}

} // namespace spiral
