#include "spiral/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <string>
#include <thread>

#include "spiral/errors.hpp"

namespace spiral {

namespace {

// Entries whose magnitude is below this floor are compared absolutely when
// deciding convergence of a table.
constexpr double kTableFloor = 1e-12;
// Entries smaller than this fraction of the largest one are compared in
// absolute terms; their squared weight is far below any tolerance.
constexpr double kTableRelFloor = 1e-7;
constexpr double kSingleFloor = 1e-15;
// Node pairs whose integrand bound is below exp(kPruneLog) are skipped.
constexpr double kPruneLog = -46.0;

int abs_max(std::initializer_list<int> values) {
    int m = 0;
    for (int v : values) m = std::max(m, std::abs(v));
    return m;
}

// Laguerre-Gaussian radial factor sampled on a rule, premultiplied by the
// conjugated constant phase and an extra per-node weight.
// out[p * n + j] for p in [0, p_max].
std::vector<cplx> radial_table(int l, int p_max, double a, const RadialRule& rule, double scale,
                               bool with_pi_weight) {
    const int l_abs = std::abs(l);
    const std::size_t n = rule.size();
    std::vector<cplx> out(static_cast<std::size_t>(p_max + 1) * n);
    std::vector<double> lag(static_cast<std::size_t>(p_max + 1));
    std::vector<double> log_norm(static_cast<std::size_t>(p_max + 1));
    for (int p = 0; p <= p_max; ++p)
        log_norm[p] = 0.5 * (std::log(4.0 * a / (2.0 * kPi)) + std::lgamma(p + 1.0) -
                             std::lgamma(l_abs + p + 1.0));
    for (std::size_t j = 0; j < n; ++j) {
        const double r = rule.nodes[j];
        const double x = 2.0 * a * r * r;
        laguerre_sequence(l_abs, x, lag);
        const double node_weight = rule.weights[j] * r * scale * (with_pi_weight ? 2.0 * kPi : 1.0);
        for (int p = 0; p <= p_max; ++p) {
            double mag = 0.0;
            if (!(x == 0.0 && l_abs > 0)) {
                double log_mag = log_norm[p] - 0.5 * x;
                if (l_abs > 0) log_mag += 0.5 * l_abs * std::log(x);
                mag = std::exp(log_mag) * lag[p];
            }
            out[static_cast<std::size_t>(p) * n + j] = mag * node_weight * std::conj(lg_constant_phase(l, p));
        }
    }
    return out;
}

// cos, sin and exp(-i l_lo psi) on psi_m = 2 pi m / n, m = 0..n/2
struct AngularTable {
    std::vector<double> cos, sin;
    std::vector<cplx> start;

    AngularTable(int n, int l_lo) {
        const int half = n / 2;
        cos.resize(half + 1);
        sin.resize(half + 1);
        start.resize(half + 1);
        for (int m = 0; m <= half; ++m) {
            const double psi = 2.0 * kPi * m / n;
            cos[m] = std::cos(psi);
            sin[m] = std::sin(psi);
            start[m] = std::polar(1.0, -l_lo * psi);
        }
        // exact values on the axis
        sin[0] = 0.0;
        sin[half] = 0.0;
        cos[half] = -1.0;
    }
};

// One level of the reduced route. Returns values[il * P * P + p1 * P + p2].
std::vector<cplx> reduced_level(const NormalizedParams& params, int l0, int l_lo, int l_hi, int p_max,
                                const RadialRule& rule, const QuadratureConfig& cfg, int level) {
    const int nl = l_hi - l_lo + 1;
    const int P = p_max + 1;
    const std::size_t nr = rule.size();
    const int harmonic_max = abs_max({l_lo, l_hi});

    std::vector<std::vector<cplx>> sig(nl), idl(nl);
    for (int il = 0; il < nl; ++il) {
        const int l1 = l_lo + il;
        sig[il] = radial_table(l1, p_max, params.a, rule, 1.0, true);
        idl[il] = radial_table(l0 - l1, p_max, params.a, rule, 1.0, false);
    }

    const ScaledIntegrand phi(params, l0);
    // t_rows[j][il * P + p2] = sum_k F_{l1}(r_j, r_k) * idler(p2, k)
    std::vector<cplx> t_rows(nr * static_cast<std::size_t>(nl) * P);

    parallel_for(nr, cfg.jobs, [&](std::size_t j) {
        const double rs = rule.nodes[j];
        std::vector<cplx> f_row(static_cast<std::size_t>(nl) * nr, cplx(0.0, 0.0));
        std::vector<double> harm_re(nl), harm_im(nl);
        std::map<int, AngularTable> tables;
        for (std::size_t k = 0; k < nr; ++k) {
            const double ri = rule.nodes[k];
            if (phi.log_bound(rs, ri) < kPruneLog) continue;
            const int n_psi = angular_points_for(params, l0, rs, ri, harmonic_max, cfg.angular_points, level);
            auto it = tables.find(n_psi);
            if (it == tables.end()) it = tables.emplace(n_psi, AngularTable(n_psi, l_lo)).first;
            const AngularTable& tab = it->second;
            std::fill(harm_re.begin(), harm_re.end(), 0.0);
            std::fill(harm_im.begin(), harm_im.end(), 0.0);
            const double sum2 = rs * rs + ri * ri;
            const double cross = 2.0 * rs * ri;
            const int half = n_psi / 2;
            // psi and -psi share the envelope; the winding factor of the pump
            // turns into its conjugate, so each pair costs one evaluation.
            for (int m = 0; m <= half; ++m) {
                const double c = tab.cos[m];
                const double s = tab.sin[m];
                const cplx env = phi.envelope(sum2 + cross * c, sum2 - cross * c);
                cplx wind(1.0, 0.0);
                if (l0 != 0) {
                    const cplx q(rs * c + ri, l0 > 0 ? rs * s : -rs * s);
                    for (int r = 0; r < std::abs(l0); ++r) wind *= q;
                }
                // h+ e^{-in psi} + h- e^{+in psi} = A cos(n psi) - i B sin(n psi)
                const bool edge = (m == 0 || m == half);
                const cplx h_pos = env * wind;
                const cplx h_neg = edge ? cplx(0.0, 0.0) : env * std::conj(wind);
                const cplx A = h_pos + h_neg;
                const cplx B = h_pos - h_neg;
                double cn = tab.start[m].real();
                double sn = -tab.start[m].imag();
                for (int il = 0; il < nl; ++il) {
                    harm_re[il] += A.real() * cn + B.imag() * sn;
                    harm_im[il] += A.imag() * cn - B.real() * sn;
                    const double next = cn * c - sn * s;
                    sn = sn * c + cn * s;
                    cn = next;
                }
            }
            const double dpsi = 2.0 * kPi / n_psi;
            for (int il = 0; il < nl; ++il) f_row[static_cast<std::size_t>(il) * nr + k] = cplx(harm_re[il], harm_im[il]) * dpsi;
        }
        cplx* t = &t_rows[j * static_cast<std::size_t>(nl) * P];
        for (int il = 0; il < nl; ++il) {
            const cplx* fr = &f_row[static_cast<std::size_t>(il) * nr];
            for (int p2 = 0; p2 < P; ++p2) {
                const cplx* id = &idl[il][static_cast<std::size_t>(p2) * nr];
                cplx acc(0.0, 0.0);
                for (std::size_t k = 0; k < nr; ++k) acc += fr[k] * id[k];
                t[il * P + p2] = acc;
            }
        }
    });

    std::vector<cplx> values(static_cast<std::size_t>(nl) * P * P, cplx(0.0, 0.0));
    for (std::size_t j = 0; j < nr; ++j) {
        const cplx* t = &t_rows[j * static_cast<std::size_t>(nl) * P];
        for (int il = 0; il < nl; ++il)
            for (int p1 = 0; p1 < P; ++p1) {
                const cplx s = sig[il][static_cast<std::size_t>(p1) * nr + j];
                cplx* v = &values[(static_cast<std::size_t>(il) * P + p1) * P];
                for (int p2 = 0; p2 < P; ++p2) v[p2] += s * t[il * P + p2];
            }
    }
    return values;
}

double relative_change(cplx now, cplx before, double floor) {
    return std::abs(now - before) / std::max(std::abs(now), floor);
}

void check_table_request(int l_lo, int l_hi, int p_max) {
    if (l_lo > l_hi) throw RangeError("amplitude table: empty winding range");
    if (p_max < 0 || p_max > 200) throw RangeError("amplitude table: p_max outside [0, 200]");
}

// One level of the tensor-product route for a batch of pairs.
std::vector<cplx> brute_level(std::span<const ModePair> pairs, const NormalizedParams& params, int l0,
                              const RadialRule& rule, int n_phi, int jobs) {
    const double w0 = params.scaled_analysis_width();
    const std::size_t nr = rule.size();
    const std::size_t n_pts = nr * static_cast<std::size_t>(n_phi);
    const double dphi = 2.0 * kPi / n_phi;

    // Signal points on phi = m dphi, idler points on the half-shifted grid.
    std::vector<Vec2> sig_pts(n_pts), idl_pts(n_pts);
    std::vector<double> sig_w(n_pts), idl_w(n_pts);
    for (std::size_t j = 0; j < nr; ++j)
        for (int m = 0; m < n_phi; ++m) {
            const std::size_t i = j * n_phi + m;
            const double r = rule.nodes[j];
            const double w = rule.weights[j] * r * dphi;
            sig_pts[i] = TransversePoint(r, dphi * m).cartesian();
            idl_pts[i] = TransversePoint(r, dphi * (m + 0.5)).cartesian();
            sig_w[i] = w;
            idl_w[i] = w;
        }

    std::vector<ModeIndex> sig_modes, idl_modes;
    std::vector<std::size_t> sig_of(pairs.size()), idl_of(pairs.size());
    auto intern = [](std::vector<ModeIndex>& list, ModeIndex m) {
        auto it = std::find(list.begin(), list.end(), m);
        if (it != list.end()) return static_cast<std::size_t>(it - list.begin());
        list.push_back(m);
        return list.size() - 1;
    };
    for (std::size_t q = 0; q < pairs.size(); ++q) {
        sig_of[q] = intern(sig_modes, pairs[q].signal);
        idl_of[q] = intern(idl_modes, pairs[q].idler);
    }
    const std::size_t n_idl = idl_modes.size();

    // conj(LG) * weight at every grid point
    std::vector<cplx> sig_lg(sig_modes.size() * n_pts);
    for (std::size_t s = 0; s < sig_modes.size(); ++s)
        for (std::size_t i = 0; i < n_pts; ++i)
            sig_lg[s * n_pts + i] = std::conj(lg_mode(sig_modes[s], w0, sig_pts[i])) * sig_w[i];
    // interleaved by point, real and imaginary parts apart, so the inner
    // loop vectorizes
    std::vector<double> idl_re(n_idl * n_pts), idl_im(n_idl * n_pts);
    for (std::size_t i = 0; i < n_pts; ++i)
        for (std::size_t s = 0; s < n_idl; ++s) {
            const cplx v = std::conj(lg_mode(idl_modes[s], w0, idl_pts[i])) * idl_w[i];
            idl_re[i * n_idl + s] = v.real();
            idl_im[i * n_idl + s] = v.imag();
        }

    const ScaledIntegrand phi(params, l0);
    // Rotating both points by the same angle only multiplies the integrand by
    // exp(i l0 angle), so Phi on the grid is tabulated once per radial pair
    // against the angular offset n - m.
    std::vector<cplx> rot(static_cast<std::size_t>(n_phi));
    for (int m = 0; m < n_phi; ++m) rot[m] = std::polar(1.0, l0 * dphi * m);
    std::vector<cplx> partial(nr * pairs.size(), cplx(0.0, 0.0));
    parallel_for(nr, jobs, [&](std::size_t j) {
        std::vector<double> g_re(n_idl), g_im(n_idl);
        std::vector<cplx> offset(nr * n_phi, cplx(0.0, 0.0));
        std::vector<char> live(nr, 0);
        const Vec2 qs0 = sig_pts[j * n_phi];
        for (std::size_t k = 0; k < nr; ++k) {
            if (phi.log_bound(rule.nodes[j], rule.nodes[k]) < kPruneLog) continue;
            live[k] = 1;
            for (int d = 0; d < n_phi; ++d) offset[k * n_phi + d] = phi(qs0, idl_pts[k * n_phi + d]);
        }
        for (int m = 0; m < n_phi; ++m) {
            const std::size_t si = j * n_phi + m;
            std::fill(g_re.begin(), g_re.end(), 0.0);
            std::fill(g_im.begin(), g_im.end(), 0.0);
            for (std::size_t k = 0; k < nr; ++k) {
                if (!live[k]) continue;
                for (int n = 0; n < n_phi; ++n) {
                    const std::size_t ii = k * n_phi + n;
                    const int d = n >= m ? n - m : n - m + n_phi;
                    const double fr = offset[k * n_phi + d].real();
                    const double fi = offset[k * n_phi + d].imag();
                    const double* lr = &idl_re[ii * n_idl];
                    const double* li = &idl_im[ii * n_idl];
                    for (std::size_t s = 0; s < n_idl; ++s) {
                        g_re[s] += fr * lr[s] - fi * li[s];
                        g_im[s] += fr * li[s] + fi * lr[s];
                    }
                }
            }
            for (std::size_t q = 0; q < pairs.size(); ++q) {
                const std::size_t s = idl_of[q];
                partial[j * pairs.size() + q] += sig_lg[sig_of[q] * n_pts + si] * rot[m] * cplx(g_re[s], g_im[s]);
            }
        }
    });
    std::vector<cplx> values(pairs.size(), cplx(0.0, 0.0));
    for (std::size_t j = 0; j < nr; ++j)
        for (std::size_t q = 0; q < pairs.size(); ++q) values[q] += partial[j * pairs.size() + q];
    return values;
}

} // namespace

// ---------------------------------------------------------------------------

void QuadratureConfig::validate() const {
    if (radial_points <= 0 || radial_panels <= 0 || angular_points <= 0)
        throw ConfigError("quadrature: point and panel counts must be positive");
    if (angular_points % 2 != 0) throw ConfigError("quadrature: angular_points must be even");
    if (radial_cutoff < 0.0 || !std::isfinite(radial_cutoff))
        throw ConfigError("quadrature: radial_cutoff must be >= 0 (0 = automatic)");
    if (!(rel_tolerance > 0.0) || rel_tolerance > 1e-2)
        throw ConfigError("quadrature: rel_tolerance must lie in (0, 1e-2]");
    if (refinement_max <= 0) throw ConfigError("quadrature: refinement_max must be positive");
    if (jobs <= 0) throw ConfigError("quadrature: jobs must be positive");
}

QuadratureConfig QuadratureConfig::brute_default() {
    QuadratureConfig cfg;
    cfg.radial_points = 12;
    cfg.radial_panels = 3;
    cfg.angular_points = 64;
    cfg.refinement_max = 2;
    // the refined level is far more accurate than this change suggests; the
    // oracle comparisons it serves are at 1e-4 or looser
    cfg.rel_tolerance = 1e-5;
    return cfg;
}

std::string_view to_string(Method m) {
    switch (m) {
    case Method::reduced3d: return "reduced3d";
    case Method::brute4d: return "brute4d";
    case Method::closed_form: return "closed-form";
    }
    return "unknown";
}

void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
    if (n <= 0) throw RangeError("gauss_legendre: n must be positive");
    nodes.assign(n, 0.0);
    weights.assign(n, 0.0);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        // recompute the derivative at the converged node
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
            const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if (n % 2 == 1) nodes[n / 2] = 0.0;
}

RadialRule RadialRule::composite(double upper, int panels, int points) {
    if (!(upper > 0.0)) throw RangeError("radial rule: upper limit must be positive");
    std::vector<double> x, w;
    gauss_legendre(points, x, w);
    RadialRule rule;
    rule.nodes.reserve(static_cast<std::size_t>(panels) * points);
    rule.weights.reserve(static_cast<std::size_t>(panels) * points);
    const double h = upper / panels;
    for (int k = 0; k < panels; ++k) {
        const double lo = h * k;
        for (int i = 0; i < points; ++i) {
            rule.nodes.push_back(lo + 0.5 * h * (x[i] + 1.0));
            rule.weights.push_back(0.5 * h * w[i]);
        }
    }
    return rule;
}

double auto_radial_cutoff(const NormalizedParams& params, int l_abs_max, int p_max) {
    // Laguerre functions turn over near x = 4p + 2|l| + 2 and decay at least
    // like exp(-x/2) beyond; 72 more units of x leaves ~1e-15 of the peak.
    const double x_max = 4.0 * p_max + 2.0 * l_abs_max + 2.0 + 72.0;
    return std::sqrt(x_max / (2.0 * params.a));
}

int angular_points_for(const NormalizedParams& params, int l0, double rho_s, double rho_i,
                       int harmonic_max, int minimum, int level) {
    const double s = rho_s * rho_i;
    const double z = 2.0 * params.b * s;
    // pump: I_n(z)/I_0(z) ~ exp(-n^2/2z) < e^-20; phase matching: Bessel content up to ~ s
    const double extent = std::sqrt(40.0 * z) + s + 6.0 * std::cbrt(s) + std::abs(l0) + 12.0;
    int n = std::max(minimum, static_cast<int>(std::ceil(extent)) + harmonic_max);
    n = (n + 3) / 4 * 4;
    return n << level;
}

// ---------------------------------------------------------------------------

ScaledIntegrand::ScaledIntegrand(const NormalizedParams& params, int l0) : l0_(l0), b_(params.b) {
    const int l_abs = std::abs(l0);
    pump_log_norm_ = 0.5 * std::log(4.0 * b_ / (2.0 * kPi)) - 0.5 * std::lgamma(l_abs + 1.0) +
                     0.5 * l_abs * std::log(2.0 * b_);
    pump_phase_ = lg_constant_phase(l0, 0);
}

cplx ScaledIntegrand::envelope(double q2, double d2) const {
    const double pump_mag = std::exp(pump_log_norm_ - b_ * q2);
    if (pump_mag == 0.0) return {0.0, 0.0};
    const double u = 0.25 * d2;
    const double su = std::sin(u);
    const double cu = std::cos(u);
    const double w = pump_mag * std::sqrt(2.0) / kPi * (u < 1e-4 ? sinc(u) : su / u);
    return pump_phase_ * cplx(w * cu, -w * su);
}

cplx ScaledIntegrand::operator()(Vec2 q_s, Vec2 q_i) const {
    const Vec2 Q = q_s + q_i;
    const cplx env = envelope(Q.norm2(), (q_s - q_i).norm2());
    if (l0_ == 0) return env;
    cplx wind(1.0, 0.0);
    const cplx z(Q.x, l0_ > 0 ? Q.y : -Q.y);
    for (int k = 0; k < std::abs(l0_); ++k) wind *= z;
    return env * wind;
}

double ScaledIntegrand::log_bound(double rho_s, double rho_i) const {
    const double gap = rho_s - rho_i;
    double bound = pump_log_norm_ - b_ * gap * gap + std::log(std::sqrt(2.0) / kPi);
    if (l0_ != 0) bound += std::abs(l0_) * std::log(std::max(rho_s + rho_i, 1e-300));
    return bound;
}

// ---------------------------------------------------------------------------

AmplitudeTable::AmplitudeTable(int l0, int l_lo, int l_hi, int p_max)
    : l0_(l0), l_lo_(l_lo), l_hi_(l_hi), p_max_(p_max) {
    check_table_request(l_lo, l_hi, p_max);
    entries_.resize(static_cast<std::size_t>(l_hi - l_lo + 1) * (p_max + 1) * (p_max + 1));
}

std::size_t AmplitudeTable::index(int l1, int p1, int p2) const {
    if (l1 < l_lo_ || l1 > l_hi_ || p1 < 0 || p1 > p_max_ || p2 < 0 || p2 > p_max_)
        throw RangeError("amplitude table: index outside the computed range");
    const std::size_t P = static_cast<std::size_t>(p_max_ + 1);
    return (static_cast<std::size_t>(l1 - l_lo_) * P + p1) * P + p2;
}

Amplitude& AmplitudeTable::at(int l1, int p1, int p2) { return entries_[index(l1, p1, p2)]; }
const Amplitude& AmplitudeTable::at(int l1, int p1, int p2) const { return entries_[index(l1, p1, p2)]; }

AmplitudeTable amplitude_table(const NormalizedParams& params, int l0, int l_lo, int l_hi, int p_max,
                               const QuadratureConfig& cfg) {
    cfg.validate();
    check_table_request(l_lo, l_hi, p_max);
    const int l_abs_max = abs_max({l_lo, l_hi, l0 - l_lo, l0 - l_hi});
    const double cutoff = cfg.radial_cutoff > 0.0 ? cfg.radial_cutoff : auto_radial_cutoff(params, l_abs_max, p_max);

    std::vector<cplx> prev;
    double worst = 0.0;
    double floor = kTableFloor;
    std::size_t worst_at = 0;
    for (int level = 0; level <= cfg.refinement_max; ++level) {
        const RadialRule rule = RadialRule::composite(cutoff, cfg.radial_panels << level, cfg.radial_points);
        std::vector<cplx> vals = reduced_level(params, l0, l_lo, l_hi, p_max, rule, cfg, level);
        if (level > 0) {
            worst = 0.0;
            double peak = 0.0;
            for (const cplx& v : vals) peak = std::max(peak, std::abs(v));
            floor = std::max(kTableFloor, kTableRelFloor * peak);
            for (std::size_t i = 0; i < vals.size(); ++i) {
                const double e = relative_change(vals[i], prev[i], floor);
                if (e > worst) worst = e, worst_at = i;
            }
            if (worst < cfg.rel_tolerance) {
                AmplitudeTable table(l0, l_lo, l_hi, p_max);
                const int P = p_max + 1;
                for (int il = 0; il <= l_hi - l_lo; ++il)
                    for (int p1 = 0; p1 < P; ++p1)
                        for (int p2 = 0; p2 < P; ++p2) {
                            const std::size_t i = (static_cast<std::size_t>(il) * P + p1) * P + p2;
                            table.at(l_lo + il, p1, p2) =
                                Amplitude{vals[i], Method::reduced3d, relative_change(vals[i], prev[i], floor)};
                        }
                table.set_error_estimate(worst);
                return table;
            }
        }
        prev = std::move(vals);
    }
    throw ConvergenceError("reduced quadrature: table did not converge after " +
                               std::to_string(cfg.refinement_max) + " refinements (relative change " +
                               std::to_string(worst) + ")",
                           prev.empty() ? cplx{} : prev[worst_at], worst);
}

Amplitude amplitude_reduced(const ModePair& pair, const NormalizedParams& params, int l0,
                            const QuadratureConfig& cfg) {
    cfg.validate();
    const int l1 = pair.signal.l;
    const int l2 = pair.idler.l;
    if (l1 + l2 != l0) return Amplitude{{0.0, 0.0}, Method::reduced3d, 0.0};

    const int p_max = std::max(pair.signal.p, pair.idler.p);
    check_table_request(l1, l1, p_max);
    const int P = p_max + 1;
    const std::size_t idx = static_cast<std::size_t>(pair.signal.p) * P + pair.idler.p;
    const double cutoff =
        cfg.radial_cutoff > 0.0 ? cfg.radial_cutoff : auto_radial_cutoff(params, abs_max({l1, l2}), p_max);

    cplx prev;
    double change = 0.0;
    for (int level = 0; level <= cfg.refinement_max; ++level) {
        const RadialRule rule = RadialRule::composite(cutoff, cfg.radial_panels << level, cfg.radial_points);
        const cplx v = reduced_level(params, l0, l1, l1, p_max, rule, cfg, level)[idx];
        if (level > 0) {
            change = relative_change(v, prev, kSingleFloor);
            if (change < cfg.rel_tolerance) return Amplitude{v, Method::reduced3d, change};
        }
        prev = v;
    }
    throw ConvergenceError("reduced quadrature: amplitude did not converge (relative change " +
                               std::to_string(change) + ")",
                           prev, change);
}

std::vector<Amplitude> amplitude_brute_batch(std::span<const ModePair> pairs, const NormalizedParams& params,
                                             int l0, const QuadratureConfig& cfg) {
    cfg.validate();
    if (pairs.empty()) return {};
    int l_abs = 0, p_max = 0, l_sum = 0;
    for (const auto& pr : pairs) {
        if (std::abs(pr.signal.l) > 6 || std::abs(pr.idler.l) > 6 || pr.signal.p > 4 || pr.idler.p > 4)
            throw RangeError("brute quadrature: oracle limited to |l| <= 6, p <= 4");
        l_abs = std::max({l_abs, std::abs(pr.signal.l), std::abs(pr.idler.l)});
        p_max = std::max({p_max, pr.signal.p, pr.idler.p});
        l_sum = std::max(l_sum, std::abs(pr.signal.l) + std::abs(pr.idler.l) + std::abs(l0));
    }
    // Mode content below ~1e-12 of the peak lies beyond x = 4p + 2|l| + 2 + 56.
    const double x_max = 4.0 * p_max + 2.0 * l_abs + 2.0 + 56.0;
    const double cutoff = cfg.radial_cutoff > 0.0 ? cfg.radial_cutoff : std::sqrt(x_max / (2.0 * params.a));
    // angular resolution sized where the integrand still exceeds ~1e-8
    const double r_eff = std::min(cutoff, std::sqrt((4.0 * p_max + 2.0 * l_abs + 2.0 + 30.0) / (2.0 * params.a)));
    int n_phi = std::max({cfg.angular_points, 8 * l_sum + 16,
                          angular_points_for(params, l0, r_eff, r_eff, 0, 0, 0)});
    n_phi = (n_phi + 7) / 8 * 8;
    // Refinement doubles the radial panels only; the trapezoid in angle is
    // spectrally accurate once n_phi clears the highest harmonic, which the
    // count above does with margin.

    std::vector<cplx> prev;
    double worst = 0.0;
    std::size_t worst_at = 0;
    for (int level = 0; level <= cfg.refinement_max; ++level) {
        const RadialRule rule = RadialRule::composite(cutoff, cfg.radial_panels << level, cfg.radial_points);
        std::vector<cplx> vals = brute_level(pairs, params, l0, rule, n_phi, cfg.jobs);
        if (level > 0) {
            // Selection-rule violations are analytically zero; their residual
            // is reported as the error estimate but does not gate convergence.
            worst = 0.0;
            double peak = 0.0;
            for (const cplx& v : vals) peak = std::max(peak, std::abs(v));
            const double floor = std::max(kTableFloor, kTableRelFloor * peak);
            std::vector<double> errs(vals.size());
            for (std::size_t q = 0; q < vals.size(); ++q) {
                const bool allowed = pairs[q].signal.l + pairs[q].idler.l == l0;
                errs[q] = allowed ? relative_change(vals[q], prev[q], floor) : std::abs(vals[q]);
                if (allowed && errs[q] > worst) worst = errs[q], worst_at = q;
            }
            if (worst < cfg.rel_tolerance) {
                std::vector<Amplitude> out(vals.size());
                for (std::size_t q = 0; q < vals.size(); ++q) out[q] = Amplitude{vals[q], Method::brute4d, errs[q]};
                return out;
            }
        }
        prev = std::move(vals);
    }
    throw ConvergenceError("brute quadrature: did not converge (relative change " + std::to_string(worst) + ")",
                           prev[worst_at], worst);
}

Amplitude amplitude_brute(const ModePair& pair, const NormalizedParams& params, int l0,
                          const QuadratureConfig& cfg) {
    return amplitude_brute_batch(std::span<const ModePair>(&pair, 1), params, l0, cfg).front();
}

double state_norm(const NormalizedParams& params, int l0, const QuadratureConfig& cfg, int l_max, int p_max) {
    if (l_max < 0 || p_max < 0) throw RangeError("state_norm: truncation bounds must be >= 0");
    const AmplitudeTable table = amplitude_table(params, l0, -l_max, l_max, p_max, cfg);
    double total = 0.0;
    for (int l1 = -l_max; l1 <= l_max; ++l1)
        for (int p1 = 0; p1 <= p_max; ++p1)
            for (int p2 = 0; p2 <= p_max; ++p2) total += std::norm(table.at(l1, p1, p2).value);
    return total;
}

// ---------------------------------------------------------------------------
// Norm oracles

double phase_match_norm(int periods, int points_per_period) {
    std::vector<double> x, w;
    gauss_legendre(points_per_period, x, w);
    // plane integral = 2 pi \int |W(rho)|^2 rho drho, rho = 2 sqrt(u), rho drho = 2 du
    double sum = 0.0;
    for (int k = 0; k < periods; ++k) {
        const double lo = kPi * k;
        for (int i = 0; i < points_per_period; ++i) {
            const double u = lo + 0.5 * kPi * (x[i] + 1.0);
            const double rho = 2.0 * std::sqrt(u);
            sum += 0.5 * kPi * w[i] * std::norm(phase_match_W(Vec2{rho, 0.0}, 1.0));
        }
    }
    const double upper = kPi * periods;
    const double tail = (2.0 / (kPi * kPi)) / (2.0 * upper); // \int_U^inf |W|^2 du
    return 2.0 * kPi * 2.0 * (sum + tail);
}

double phi_norm(const NormalizedParams& params, const PumpSpec& pump, int periods) {
    const double w_p = params.scaled_pump_width();
    const int m_max = pump.max_abs_winding();
    // pump extent in Q: the LG_0^m of width w_p behaves like exp(-b |Q|^2)
    const double q_cut = std::sqrt((2.0 * m_max + 2.0 + 72.0) / (2.0 * params.b));
    const RadialRule q_rule = RadialRule::composite(q_cut, 4, 16);
    const int n_q = 8 * (2 * m_max + 1) + 8;
    std::vector<double> x, w;
    gauss_legendre(8, x, w);
    const int n_d = 4;

    double sum = 0.0;
    double pump_sum = 0.0;
    for (std::size_t a = 0; a < q_rule.size(); ++a)
        for (int ia = 0; ia < n_q; ++ia) {
            const Vec2 Q = TransversePoint(q_rule.nodes[a], 2.0 * kPi * ia / n_q).cartesian();
            const double wq = q_rule.weights[a] * q_rule.nodes[a] * 2.0 * kPi / n_q;
            pump_sum += wq * std::norm(pump_profile(pump, w_p, Q));
            for (int k = 0; k < periods; ++k)
                for (std::size_t i = 0; i < x.size(); ++i) {
                    const double u = kPi * k + 0.5 * kPi * (x[i] + 1.0);
                    const double rho = 2.0 * std::sqrt(u);
                    const double wd = 0.5 * kPi * w[i] * 2.0 * (2.0 * kPi / n_d);
                    for (int id = 0; id < n_d; ++id) {
                        const Vec2 D = TransversePoint(rho, 2.0 * kPi * (id + 0.25) / n_d).cartesian();
                        const Vec2 qs{0.5 * (Q.x + D.x), 0.5 * (Q.y + D.y)};
                        const Vec2 qi{0.5 * (Q.x - D.x), 0.5 * (Q.y - D.y)};
                        sum += wq * wd * std::norm(mode_function_phi(qs, qi, pump, w_p, 1.0));
                    }
                }
        }
    const double upper = kPi * periods;
    const double w_tail = 4.0 * kPi * (2.0 / (kPi * kPi)) / (2.0 * upper);
    return 0.25 * (sum + pump_sum * w_tail);
}

// ---------------------------------------------------------------------------

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& body) {
    if (jobs <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(jobs), n);
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t) {
        threads.emplace_back([&, t] {
            try {
                for (std::size_t i = t; i < n; i += workers) body(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        });
    }
    for (auto& th : threads) th.join();
    if (failure) std::rethrow_exception(failure);
}

} // namespace spiral
