#include "spiral/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "spiral/errors.hpp"
#include "spiral/spectrum.hpp"

namespace spiral::cli {

namespace {

namespace fs = std::filesystem;

const std::vector<std::string> kPhysicalKeys = {"lambda_p_m", "L_m", "w_p_m", "w0_m"};
const std::vector<std::string> kNormalizedKeys = {"wbar_p", "wbar_0"};

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

double to_double(const std::string& key, const std::string& text) {
    const std::string t = trim(text);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size() || t.empty() || !std::isfinite(v))
        throw ConfigError("'" + key + "': expected a number, got '" + text + "'");
    return v;
}

int to_int(const std::string& key, const std::string& text) {
    const std::string t = trim(text);
    int v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
        throw ConfigError("'" + key + "': expected an integer, got '" + text + "'");
    return v;
}

double positive(const std::string& key, const std::string& text) {
    const double v = to_double(key, text);
    if (!(v > 0.0)) throw ConfigError("'" + key + "' must be positive");
    return v;
}

int nonnegative_int(const std::string& key, const std::string& text) {
    const int v = to_int(key, text);
    if (v < 0) throw ConfigError("'" + key + "' must be >= 0");
    return v;
}

int positive_int(const std::string& key, const std::string& text) {
    const int v = to_int(key, text);
    if (v <= 0) throw ConfigError("'" + key + "' must be positive");
    return v;
}

std::string pump_text(const PumpSpec& pump) {
    std::string s;
    for (const auto& c : pump.components()) {
        if (!s.empty()) s += ",";
        s += std::to_string(c.winding) + ":" + format_number(c.coeff.real()) + ":" + format_number(c.coeff.imag());
    }
    return s;
}

void echo_config(Table& t, const RunConfig& cfg, const NormalizedParams& p) {
    if (cfg.physical) {
        t.meta.emplace_back("lambda_p_m", format_number(cfg.physical->lambda_p_m));
        t.meta.emplace_back("L_m", format_number(cfg.physical->L_m));
        t.meta.emplace_back("w_p_m", format_number(cfg.physical->w_p_m));
        t.meta.emplace_back("w0_m", format_number(cfg.physical->w0_m));
    }
    t.meta.emplace_back("wbar_p", format_number(p.wbar_p));
    t.meta.emplace_back("wbar_0", format_number(p.wbar_0));
    t.meta.emplace_back("n_p", format_number(p.n_p));
    t.meta.emplace_back("a", format_number(p.a));
    t.meta.emplace_back("b", format_number(p.b));
}

void echo_quadrature(Table& t, const QuadratureConfig& q) {
    t.meta.emplace_back("tol", format_number(q.rel_tolerance));
    t.meta.emplace_back("radial_points", std::to_string(q.radial_points));
    t.meta.emplace_back("radial_panels", std::to_string(q.radial_panels));
    t.meta.emplace_back("angular_points", std::to_string(q.angular_points));
    t.meta.emplace_back("radial_cutoff", q.radial_cutoff > 0.0 ? format_number(q.radial_cutoff) : "auto");
    t.meta.emplace_back("refinement_max", std::to_string(q.refinement_max));
}

std::string extension(Format f) { return f == Format::json ? ".json" : ".csv"; }

void write_table(const Table& t, Format f, std::ostream& out) {
    if (f == Format::json)
        write_json(t, out);
    else
        write_csv(t, out);
}

// Destination for a single-table verb: --out path, else the output directory
// from the environment, else stdout.
void emit(const Table& t, const RunConfig& cfg, const std::string& default_name, std::ostream& out) {
    std::string path = cfg.out;
    if (path.empty()) {
        if (const char* dir = std::getenv(kOutputDirEnv); dir && *dir)
            path = (fs::path(dir) / (default_name + extension(cfg.format))).string();
    }
    if (path.empty() || path == "-") {
        write_table(t, cfg.format, out);
        return;
    }
    std::ofstream file(path);
    if (!file) throw IoError("cannot open '" + path + "' for writing");
    write_table(t, cfg.format, file);
    file.close();
    if (!file) throw IoError("write to '" + path + "' failed");
}

void emit_to_dir(const Table& t, Format f, const fs::path& dir, const std::string& name, std::ostream& log) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
    const fs::path path = dir / (name + extension(f));
    std::ofstream file(path);
    if (!file) throw IoError("cannot open '" + path.string() + "' for writing");
    write_table(t, f, file);
    file.close();
    if (!file) throw IoError("write to '" + path.string() + "' failed");
    log << path.string() << "\n";
}

void warn_validity(const RunConfig& cfg, std::ostream& err) {
    if (!cfg.has_params()) return;
    const double fig = cfg.validity_figure();
    if (fig < kValidityThreshold)
        err << "warning: pi n_p wbar_p = " << format_number(fig) << " < " << kValidityThreshold
            << "; the thin-crystal model assumes it is much larger than 1\n";
}

int require_truncation(const std::optional<int>& v, int fallback) { return v ? *v : fallback; }

// ---------------------------------------------------------------------------
// verbs

struct AmplitudeArgs {
    int l1 = 0, l2 = 0, p1 = 0, p2 = 0;
    std::string method = "quadrature";
    std::string route = "reduced";
};

Table cmd_spectrum(const RunConfig& cfg) {
    const NormalizedParams p = cfg.params();
    const int l_max = require_truncation(cfg.l_max, 10);
    const int p_max = require_truncation(cfg.p_max, 10);
    const SpiralSpectrum s = spiral_spectrum(p, cfg.pump, l_max, p_max, cfg.quadrature);
    Table t;
    echo_config(t, cfg, p);
    t.meta.emplace_back("pump", pump_text(cfg.pump));
    t.meta.emplace_back("l_max", std::to_string(l_max));
    t.meta.emplace_back("p_max", std::to_string(p_max));
    echo_quadrature(t, cfg.quadrature);
    t.meta.emplace_back("captured_norm", format_number(s.captured_norm));
    t.columns = {"l1", "l2", "P"};
    for (const auto& [key, w] : s.entries) t.rows.push_back({Cell(key.first), Cell(key.second), Cell(w)});
    return t;
}

Table cmd_amplitude(const RunConfig& cfg, const AmplitudeArgs& a) {
    const NormalizedParams p = cfg.params();
    if (a.method != "quadrature" && a.method != "closed" && a.method != "both")
        throw ConfigError("--method must be quadrature, closed or both");
    if (a.route != "reduced" && a.route != "brute") throw ConfigError("--route must be reduced or brute");
    const ModePair pair{ModeIndex(a.l1, a.p1), ModeIndex(a.l2, a.p2)};
    const int l0 = a.l1 + a.l2;
    const cplx coeff = cfg.pump.coefficient(l0);
    const bool wants_closed = a.method != "quadrature";
    if (wants_closed && (a.p1 > 0 || a.p2 > 0))
        throw UnsupportedMethodError("closed form exists only for p1 = p2 = 0");

    std::vector<Amplitude> results;
    if (a.method != "closed") {
        Amplitude q;
        if (coeff == cplx(0.0, 0.0))
            q = Amplitude{{0.0, 0.0}, a.route == "brute" ? Method::brute4d : Method::reduced3d, 0.0};
        else if (a.route == "brute")
            q = amplitude_brute(pair, p, l0, cfg.quadrature);
        else
            q = amplitude_reduced(pair, p, l0, cfg.quadrature);
        q.value *= coeff;
        results.push_back(q);
    }
    if (wants_closed) {
        Amplitude c{{0.0, 0.0}, Method::closed_form, 0.0};
        if (coeff != cplx(0.0, 0.0)) {
            c = closed_amplitude(ClosedFormInputs(l0, a.l1, a.l2, p), cfg.variant);
            c.value *= coeff;
        }
        results.push_back(c);
    }

    Table t;
    echo_config(t, cfg, p);
    t.meta.emplace_back("pump", pump_text(cfg.pump));
    t.meta.emplace_back("l1", std::to_string(a.l1));
    t.meta.emplace_back("p1", std::to_string(a.p1));
    t.meta.emplace_back("l2", std::to_string(a.l2));
    t.meta.emplace_back("p2", std::to_string(a.p2));
    if (a.method != "closed") echo_quadrature(t, cfg.quadrature);
    if (wants_closed) t.meta.emplace_back("closed_form_variant", std::string(to_string(cfg.variant)));
    t.columns = {"method", "re", "im", "abs", "phase", "error_estimate"};
    double discrepancy = 0.0;
    if (a.method == "both") {
        const cplx q = results[0].value;
        const cplx c = results[1].value;
        discrepancy = std::abs(c - q) / std::max(std::abs(q), 1e-12);
        t.columns.push_back("discrepancy");
    }
    for (const auto& r : results) {
        std::vector<Cell> row = {Cell(std::string(to_string(r.method))), Cell(r.value.real()), Cell(r.value.imag()),
                                 Cell(std::abs(r.value)), Cell(principal_phase(r.value)), Cell(r.error_estimate)};
        if (a.method == "both") row.push_back(Cell(discrepancy));
        t.rows.push_back(std::move(row));
    }
    return t;
}

Table cumulative_table(const NormalizedParams& p, int l1, int l2, int p_max, const QuadratureConfig& q) {
    const auto c = cumulative_p_weight(l1, l2, p_max, p, q);
    Table t;
    t.columns = {"p_max", "C"};
    for (int k = 0; k <= p_max; ++k) t.rows.push_back({Cell(static_cast<long long>(k)), Cell(c[k])});
    return t;
}

Table cmd_cumulative(const RunConfig& cfg, int l1, int l2) {
    const NormalizedParams p = cfg.params();
    const int p_max = require_truncation(cfg.p_max, 10);
    Table t = cumulative_table(p, l1, l2, p_max, cfg.quadrature);
    Table out;
    echo_config(out, cfg, p);
    out.meta.emplace_back("pump", "LG_0^" + std::to_string(l1 + l2));
    out.meta.emplace_back("l1", std::to_string(l1));
    out.meta.emplace_back("l2", std::to_string(l2));
    echo_quadrature(out, cfg.quadrature);
    out.columns = t.columns;
    out.rows = std::move(t.rows);
    return out;
}

Table cmd_entropy(const RunConfig& cfg, const std::string& scope, const std::string& source, double coverage) {
    const NormalizedParams p = cfg.params();
    const int l_max = require_truncation(cfg.l_max, 10);
    Table t;
    echo_config(t, cfg, p);
    t.meta.emplace_back("pump", pump_text(cfg.pump));
    t.meta.emplace_back("scope", scope);
    t.meta.emplace_back("l_max", std::to_string(l_max));
    t.meta.emplace_back("coverage", format_number(coverage));
    t.columns = {"entropy_bits", "schmidt_number", "spiral_bandwidth", "captured_fraction", "modes"};
    if (scope == "restricted") {
        if (source != "closed" && source != "quadrature") throw ConfigError("--source must be closed or quadrature");
        RestrictedOptions opts;
        opts.source = source == "closed" ? CoefficientSource::closed_form : CoefficientSource::quadrature;
        opts.variant = cfg.variant;
        opts.quadrature = cfg.quadrature;
        t.meta.emplace_back("source", source);
        if (source == "closed")
            t.meta.emplace_back("closed_form_variant", std::string(to_string(cfg.variant)));
        else
            echo_quadrature(t, cfg.quadrature);
        const RestrictedState s = restricted_state(p, cfg.pump, l_max, opts);
        const auto w = schmidt_weights(s);
        t.rows.push_back({Cell(entanglement_entropy(s)), Cell(schmidt_number(s)),
                          Cell(static_cast<long long>(spiral_bandwidth(s, coverage))), Cell(s.subspace_fraction),
                          Cell(static_cast<long long>(w.size()))});
    } else if (scope == "full") {
        if (!cfg.pump.is_single()) throw UnsupportedMethodError("full-state entropy needs a single-winding pump");
        const int l0 = cfg.pump.components().front().winding;
        const int p_max = require_truncation(cfg.p_max, 10);
        t.meta.emplace_back("p_max", std::to_string(p_max));
        echo_quadrature(t, cfg.quadrature);
        const auto w = full_state_schmidt_weights(p, l0, l_max, p_max, cfg.quadrature);
        const SpiralSpectrum s = spiral_spectrum(p, l0, l_max, p_max, cfg.quadrature);
        t.rows.push_back({Cell(entropy_bits(w)), Cell(participation_number(w)),
                          Cell(static_cast<long long>(spiral_bandwidth(s, coverage))), Cell(s.captured_norm),
                          Cell(static_cast<long long>(w.size()))});
    } else {
        throw ConfigError("--scope must be restricted or full");
    }
    return t;
}

// ---------------------------------------------------------------------------
// figures

constexpr int kFigureSpectrumLMax = 30;
constexpr int kFigureSpectrumPMax = 20;
constexpr int kFigureSweepPMax = 20;
constexpr int kFigureCumulativePMax = 10;
constexpr int kFigureRestrictedLMax = 8;

void figure_note(Table& t, const std::string& text) { t.meta.emplace_back("note", text); }

// P_{l1,l2} summed over all p does not depend on wbar_0, so unless one is
// given the truncated sums use the width where they converge fastest.
double figure_analysis_width(double wbar_p, const RunConfig& cfg) {
    return cfg.normalized ? cfg.normalized->second : optimal_analysis_width(wbar_p, cfg.n_p);
}

Table figure_spectrum(double wbar_p, const RunConfig& cfg) {
    const double wbar_0 = figure_analysis_width(wbar_p, cfg);
    const NormalizedParams p = NormalizedParams::from_normalized(wbar_p, wbar_0, cfg.n_p);
    const int l_max = require_truncation(cfg.l_max, kFigureSpectrumLMax);
    const int p_max = require_truncation(cfg.p_max, kFigureSpectrumPMax);
    const SpiralSpectrum s = spiral_spectrum(p, 0, l_max, p_max, cfg.quadrature);
    Table t;
    echo_config(t, cfg, p);
    t.meta.emplace_back("pump", "LG_0^0");
    t.meta.emplace_back("l_max", std::to_string(l_max));
    t.meta.emplace_back("p_max", std::to_string(p_max));
    echo_quadrature(t, cfg.quadrature);
    t.meta.emplace_back("captured_norm", format_number(s.captured_norm));
    figure_note(t, "P_{l1,l2} summed over p1,p2 <= p_max; the untruncated sum does not depend on wbar_0");
    t.columns = {"l1", "l2", "P"};
    for (const auto& [key, w] : s.entries) t.rows.push_back({Cell(key.first), Cell(key.second), Cell(w)});
    return t;
}

Table figure_2a(const RunConfig& cfg) {
    const int p_max = require_truncation(cfg.p_max, kFigureSweepPMax);
    Table t;
    t.meta.emplace_back("wbar_0", cfg.normalized ? format_number(cfg.normalized->second) : "optimal per wbar_p");
    t.meta.emplace_back("n_p", format_number(cfg.n_p));
    t.meta.emplace_back("pump", "LG_0^0");
    t.meta.emplace_back("p_max", std::to_string(p_max));
    echo_quadrature(t, cfg.quadrature);
    figure_note(t, "wbar_p = 1 corresponds e.g. to lambda_p = 0.4 um, L = 1 mm, w_p = 20 um");
    t.columns = {"wbar_p", "wbar_0", "P_0_0", "P_1_-1", "P_2_-2"};
    for (int k = 0; k <= 16; ++k) {
        const double wbar_p = 1.0 + 0.25 * k;
        const double wbar_0 = figure_analysis_width(wbar_p, cfg);
        const NormalizedParams p = NormalizedParams::from_normalized(wbar_p, wbar_0, cfg.n_p);
        const SpiralSpectrum s = spiral_spectrum(p, 0, 2, p_max, cfg.quadrature);
        t.rows.push_back({Cell(wbar_p), Cell(wbar_0), Cell(s.entries.at({0, 0})), Cell(s.entries.at({1, -1})),
                          Cell(s.entries.at({2, -2}))});
    }
    return t;
}

Table figure_2b(const RunConfig& cfg) {
    const double wbar_p = cfg.normalized ? cfg.normalized->first : 1.0;
    const int p_max = require_truncation(cfg.p_max, kFigureCumulativePMax);
    std::vector<double> widths = {0.5, 1.0, 2.0, optimal_analysis_width(wbar_p, cfg.n_p)};
    std::sort(widths.begin(), widths.end());
    Table t;
    t.meta.emplace_back("wbar_p", format_number(wbar_p));
    t.meta.emplace_back("n_p", format_number(cfg.n_p));
    t.meta.emplace_back("l1", "0");
    t.meta.emplace_back("l2", "0");
    echo_quadrature(t, cfg.quadrature);
    t.columns = {"p_max"};
    std::vector<std::vector<double>> cols;
    for (double w0 : widths) {
        t.columns.push_back("C_wbar0_" + format_number(w0));
        cols.push_back(cumulative_p_weight(0, 0, p_max, NormalizedParams::from_normalized(wbar_p, w0, cfg.n_p),
                                           cfg.quadrature));
    }
    for (int k = 0; k <= p_max; ++k) {
        std::vector<Cell> row = {Cell(static_cast<long long>(k))};
        for (const auto& c : cols) row.push_back(Cell(c[k]));
        t.rows.push_back(std::move(row));
    }
    return t;
}

Table figure_3(int l0, const RunConfig& cfg) {
    const double wbar_p = cfg.normalized ? cfg.normalized->first : 1.0;
    const double wbar_0 = cfg.normalized ? cfg.normalized->second : 1.0;
    const NormalizedParams p = NormalizedParams::from_normalized(wbar_p, wbar_0, cfg.n_p);
    const int l_max = require_truncation(cfg.l_max, kFigureRestrictedLMax);
    RestrictedOptions opts;
    opts.variant = cfg.variant;
    opts.renormalize = false;
    const RestrictedState s = restricted_state(p, l0, l_max, opts);
    Table t;
    echo_config(t, cfg, p);
    t.meta.emplace_back("pump", "LG_0^" + std::to_string(l0));
    t.meta.emplace_back("l_max", std::to_string(l_max));
    t.meta.emplace_back("closed_form_variant", std::string(to_string(cfg.variant)));
    t.meta.emplace_back("subspace_fraction", format_number(s.subspace_fraction));
    t.columns = {"l1", "l2", "weight", "phase"};
    for (const auto& [key, c] : s.coefficients)
        t.rows.push_back({Cell(key.first), Cell(key.second), Cell(std::norm(c)), Cell(principal_phase(c))});
    return t;
}

void cmd_figure(const RunConfig& cfg, const std::string& id, std::ostream& log) {
    fs::path dir = cfg.out;
    if (dir.empty()) {
        const char* env = std::getenv(kOutputDirEnv);
        dir = (env && *env) ? fs::path(env) : fs::path(".");
    }
    if (id == "1a" || id == "1b" || id == "1c") {
        const double wbar_p = id == "1a" ? 1.0 : id == "1b" ? 2.5 : 5.0;
        emit_to_dir(figure_spectrum(wbar_p, cfg), cfg.format, dir, "fig" + id, log);
    } else if (id == "2a") {
        emit_to_dir(figure_2a(cfg), cfg.format, dir, "fig2a", log);
    } else if (id == "2b") {
        emit_to_dir(figure_2b(cfg), cfg.format, dir, "fig2b", log);
    } else if (id == "3") {
        for (int l0 = 0; l0 <= 2; ++l0)
            emit_to_dir(figure_3(l0, cfg), cfg.format, dir, "fig3_l0_" + std::to_string(l0), log);
    } else {
        throw ConfigError("unknown figure '" + id + "' (1a, 1b, 1c, 2a, 2b, 3)");
    }
}

// ---------------------------------------------------------------------------
// validate

struct Check {
    std::string name;
    double achieved = 0.0;
    double tolerance = 0.0;
    bool pass = false;
    std::string detail;
};

Check run_check(const std::string& name, double tolerance, const std::function<double()>& measure) {
    Check c{name, 0.0, tolerance, false, ""};
    try {
        c.achieved = measure();
        c.pass = c.achieved <= tolerance;
    } catch (const ConvergenceError& e) {
        c.achieved = e.last_change();
        c.detail = e.what();
    } catch (const Error& e) {
        c.achieved = std::numeric_limits<double>::infinity();
        c.detail = e.what();
    }
    return c;
}

double rel(cplx x, cplx ref) { return std::abs(x - ref) / std::max(std::abs(ref), 1e-12); }

std::vector<Check> validation_checks(const QuadratureConfig& q) {
    std::vector<Check> checks;
    checks.push_back(run_check("norm |W|^2 plane integral = 4", 1e-4,
                               [] { return std::abs(phase_match_norm() / 4.0 - 1.0); }));
    checks.push_back(run_check("norm |Phi|^2 = 1 (wbar_p = wbar_0 = 1)", 1e-3, [] {
        return std::abs(phi_norm(NormalizedParams::from_normalized(1.0, 1.0), PumpSpec::single(0)) - 1.0);
    }));

    const std::vector<double> widths = {1.0, 2.5};
    for (double wp : widths)
        for (double w0 : widths)
            for (int l0 = 0; l0 <= 2; ++l0) {
                const NormalizedParams p = NormalizedParams::from_normalized(wp, w0);
                std::ostringstream name;
                name << "closed vs quadrature, |l| <= 4, l0 = " << l0 << ", wbar_p = " << wp << ", wbar_0 = " << w0;
                checks.push_back(run_check(name.str(), 1e-3, [&] {
                    const int lo = std::max(-4, l0 - 4);
                    const int hi = std::min(4, l0 + 4);
                    const AmplitudeTable t = amplitude_table(p, l0, lo, hi, 0, q);
                    double worst = 0.0;
                    for (int l1 = lo; l1 <= hi; ++l1) {
                        const cplx c = closed_amplitude(ClosedFormInputs(l0, l1, l0 - l1, p)).value;
                        worst = std::max(worst, rel(c, t.at(l1, 0, 0).value));
                    }
                    return worst;
                }));
            }

    const NormalizedParams unit = NormalizedParams::from_normalized(1.0, 1.0);
    checks.push_back(run_check("exchange symmetry C^{l1,l2}_{p1,p2} = C^{l2,l1}_{p2,p1}, l0 = 1", 1e-10, [&] {
        const AmplitudeTable t = amplitude_table(unit, 1, -2, 3, 2, q);
        double worst = 0.0;
        for (int l1 = -2; l1 <= 3; ++l1)
            for (int p1 = 0; p1 <= 2; ++p1)
                for (int p2 = 0; p2 <= 2; ++p2)
                    worst = std::max(worst, std::abs(t.at(l1, p1, p2).value - t.at(1 - l1, p2, p1).value));
        return worst;
    }));
    checks.push_back(run_check("reflection symmetry C^{-l1,-l2} = C^{l1,l2}, l0 = 0", 1e-10, [&] {
        const AmplitudeTable t = amplitude_table(unit, 0, -3, 3, 2, q);
        double worst = 0.0;
        for (int l1 = 1; l1 <= 3; ++l1)
            for (int p1 = 0; p1 <= 2; ++p1)
                for (int p2 = 0; p2 <= 2; ++p2)
                    worst = std::max(worst, std::abs(t.at(l1, p1, p2).value - t.at(-l1, p1, p2).value));
        return worst;
    }));
    checks.push_back(run_check("selection rule l1 + l2 != l0 gives exact zero", 0.0, [&] {
        double worst = 0.0;
        for (int l1 = -3; l1 <= 3; ++l1)
            worst = std::max(worst, std::abs(amplitude_reduced({ModeIndex(l1, 0), ModeIndex(1 - l1, 1)}, unit, 0, q).value));
        return worst;
    }));
    checks.push_back(run_check("brute force vs reduced, (0,0;0,0)", 1e-4, [&] {
        const ModePair pr{ModeIndex(0, 0), ModeIndex(0, 0)};
        QuadratureConfig bq = QuadratureConfig::brute_default();
        bq.jobs = q.jobs;
        return rel(amplitude_reduced(pr, unit, 0, q).value, amplitude_brute(pr, unit, 0, bq).value);
    }));
    checks.push_back(run_check("state norm monotone in p_max, wbar = 1", 0.0, [&] {
        const AmplitudeTable t = amplitude_table(unit, 0, -4, 4, 4, q);
        double prev = 0.0, worst = 0.0;
        for (int k = 0; k <= 4; ++k) {
            double s = 0.0;
            for (int l1 = -4; l1 <= 4; ++l1)
                for (int p1 = 0; p1 <= k; ++p1)
                    for (int p2 = 0; p2 <= k; ++p2) s += std::norm(t.at(l1, p1, p2).value);
            worst = std::max(worst, prev - s);
            prev = s;
        }
        return std::max(worst, prev - 1.0 - 1e-3);
    }));
    return checks;
}

Table cmd_validate(const RunConfig& cfg, bool& all_pass) {
    const auto checks = validation_checks(cfg.quadrature);
    Table t;
    echo_quadrature(t, cfg.quadrature);
    t.columns = {"check", "achieved", "tolerance", "status", "detail"};
    all_pass = true;
    for (const auto& c : checks) {
        all_pass = all_pass && c.pass;
        t.rows.push_back({Cell(c.name), Cell(c.achieved), Cell(c.tolerance), Cell(std::string(c.pass ? "PASS" : "FAIL")),
                          Cell(c.detail)});
    }
    t.meta.emplace_back("result", all_pass ? "PASS" : "FAIL");
    return t;
}

} // namespace

// ---------------------------------------------------------------------------

const std::vector<std::string>& known_keys() {
    static const std::vector<std::string> keys = {
        "lambda_p_m", "n_p",          "L_m",         "w_p_m",          "w0_m",         "wbar_p",
        "wbar_0",     "pump_l0",      "pump_coeffs", "l_max",          "p_max",        "tol",
        "format",     "out",          "variant",     "radial_points",  "radial_panels", "angular_points",
        "radial_cutoff", "refinement_max", "jobs"};
    return keys;
}

KeyValues parse_key_values(std::istream& in, const std::string& origin) {
    KeyValues kv;
    const auto& keys = known_keys();
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        const auto hash = line.find_first_of("#;");
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty() || line.front() == '[') continue;
        const auto eq = line.find('=');
        const std::string where = origin + ":" + std::to_string(number);
        if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (std::find(keys.begin(), keys.end(), key) == keys.end())
            throw ConfigError(where + ": unknown key '" + key + "'");
        if (!kv.emplace(key, value).second) throw ConfigError(where + ": key '" + key + "' given twice");
    }
    return kv;
}

PumpSpec parse_pump_coeffs(const std::string& text) {
    std::vector<PumpComponent> comps;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        std::vector<std::string> parts;
        std::stringstream is(item);
        std::string part;
        while (std::getline(is, part, ':')) parts.push_back(part);
        if (parts.size() < 2 || parts.size() > 3)
            throw ConfigError("pump_coeffs: entries are m:re or m:re:im, got '" + item + "'");
        const int m = to_int("pump_coeffs", parts[0]);
        const double re = to_double("pump_coeffs", parts[1]);
        const double im = parts.size() == 3 ? to_double("pump_coeffs", parts[2]) : 0.0;
        comps.push_back({m, {re, im}});
    }
    if (comps.empty()) throw ConfigError("pump_coeffs: no entries");
    return PumpSpec::normalized(std::move(comps));
}

RunConfig build_config(const KeyValues& kv, bool require_params) {
    RunConfig cfg;
    auto has = [&](const std::string& k) { return kv.count(k) > 0; };
    bool any_physical = false, any_normalized = false;
    for (const auto& k : kPhysicalKeys) any_physical = any_physical || has(k);
    for (const auto& k : kNormalizedKeys) any_normalized = any_normalized || has(k);
    if (any_physical && any_normalized)
        throw ConfigError("give either the physical block (lambda_p_m, L_m, w_p_m, w0_m) or the normalized block "
                          "(wbar_p, wbar_0), not both");
    if (has("n_p")) {
        cfg.n_p = to_double("n_p", kv.at("n_p"));
        if (!(cfg.n_p >= 1.0)) throw ConfigError("'n_p' must be >= 1");
    }
    if (any_physical) {
        for (const auto& k : kPhysicalKeys)
            if (!has(k)) throw ConfigError("physical block is missing '" + k + "'");
        cfg.physical = PhysicalBlock{positive("lambda_p_m", kv.at("lambda_p_m")), positive("L_m", kv.at("L_m")),
                                     positive("w_p_m", kv.at("w_p_m")), positive("w0_m", kv.at("w0_m"))};
    }
    if (any_normalized) {
        for (const auto& k : kNormalizedKeys)
            if (!has(k)) throw ConfigError("normalized block is missing '" + k + "'");
        cfg.normalized = std::make_pair(positive("wbar_p", kv.at("wbar_p")), positive("wbar_0", kv.at("wbar_0")));
    }
    if (require_params && !cfg.has_params())
        throw ConfigError("no parameters: give wbar_p and wbar_0, or lambda_p_m, L_m, w_p_m and w0_m");

    if (has("pump_l0") && has("pump_coeffs")) throw ConfigError("give pump_l0 or pump_coeffs, not both");
    if (has("pump_l0")) {
        cfg.pump = PumpSpec::single(to_int("pump_l0", kv.at("pump_l0")));
        cfg.pump_given = true;
    }
    if (has("pump_coeffs")) {
        cfg.pump = parse_pump_coeffs(kv.at("pump_coeffs"));
        cfg.pump_given = true;
    }
    if (has("l_max")) cfg.l_max = nonnegative_int("l_max", kv.at("l_max"));
    if (has("p_max")) cfg.p_max = nonnegative_int("p_max", kv.at("p_max"));

    QuadratureConfig& q = cfg.quadrature;
    if (has("tol")) q.rel_tolerance = positive("tol", kv.at("tol"));
    if (has("radial_points")) q.radial_points = positive_int("radial_points", kv.at("radial_points"));
    if (has("radial_panels")) q.radial_panels = positive_int("radial_panels", kv.at("radial_panels"));
    if (has("angular_points")) q.angular_points = positive_int("angular_points", kv.at("angular_points"));
    if (has("radial_cutoff")) q.radial_cutoff = positive("radial_cutoff", kv.at("radial_cutoff"));
    if (has("refinement_max")) q.refinement_max = positive_int("refinement_max", kv.at("refinement_max"));
    if (has("jobs")) q.jobs = positive_int("jobs", kv.at("jobs"));
    q.validate();

    if (has("variant")) cfg.variant = closed_form_variant_from(kv.at("variant"));
    if (has("format")) {
        const std::string f = kv.at("format");
        if (f == "csv")
            cfg.format = Format::csv;
        else if (f == "json")
            cfg.format = Format::json;
        else
            throw ConfigError("'format' must be csv or json");
    }
    if (has("out")) cfg.out = kv.at("out");
    return cfg;
}

NormalizedParams RunConfig::params() const {
    if (physical) {
        PhysicalSetup s;
        s.pump_wavelength = physical->lambda_p_m;
        s.crystal_length = physical->L_m;
        s.pump_width = physical->w_p_m;
        s.analysis_width = physical->w0_m;
        s.refractive_index = n_p;
        s.pump = pump;
        return NormalizedParams::from_setup(s);
    }
    if (normalized) return NormalizedParams::from_normalized(normalized->first, normalized->second, n_p);
    throw ConfigError("no parameter block");
}

double RunConfig::validity_figure() const { return kPi * n_p * params().wbar_p; }

std::string format_number(double v) {
    if (v == 0.0) v = 0.0; // no "-0"
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.11e", v);
    return buf;
}

double principal_phase(cplx z) {
    const double ph = std::arg(z);
    return ph <= -kPi ? kPi : ph;
}

namespace {

std::string csv_cell(const Cell& c) {
    if (const auto* i = std::get_if<long long>(&c)) return std::to_string(*i);
    if (const auto* d = std::get_if<double>(&c)) return format_number(*d);
    const std::string& s = std::get<std::string>(c);
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char ch : s) {
        if (ch == '"') q += '"';
        q += ch;
    }
    return q + "\"";
}

nlohmann::ordered_json json_cell(const Cell& c) {
    if (const auto* i = std::get_if<long long>(&c)) return *i;
    if (const auto* d = std::get_if<double>(&c)) {
        // round through the CSV text so both formats carry the same value
        if (!std::isfinite(*d)) return format_number(*d);
        return std::stod(format_number(*d));
    }
    return std::get<std::string>(c);
}

} // namespace

void write_csv(const Table& t, std::ostream& out) {
    for (const auto& [k, v] : t.meta) out << "# " << k << " = " << v << "\n";
    for (std::size_t i = 0; i < t.columns.size(); ++i) out << (i ? "," : "") << t.columns[i];
    out << "\n";
    for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << csv_cell(row[i]);
        out << "\n";
    }
}

void write_json(const Table& t, std::ostream& out) {
    nlohmann::ordered_json j;
    j["meta"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : t.meta) j["meta"][k] = v;
    j["columns"] = t.columns;
    j["rows"] = nlohmann::ordered_json::array();
    for (const auto& row : t.rows) {
        nlohmann::ordered_json r = nlohmann::ordered_json::object();
        for (std::size_t i = 0; i < row.size(); ++i) r[t.columns[i]] = json_cell(row[i]);
        j["rows"].push_back(std::move(r));
    }
    out << j.dump(2) << "\n";
}

// ---------------------------------------------------------------------------

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Orbital angular momentum content of down-converted photon pairs"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    int jobs = 0;
    app.add_option("--config", config_path, "flat key = value configuration file");
    app.add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
    std::map<std::string, std::string> overrides;
    for (const auto& key : known_keys()) {
        if (key == "jobs") continue;
        app.add_option_function<std::string>("--" + key, [&overrides, key](const std::string& v) { overrides[key] = v; },
                                             "override '" + key + "'");
    }

    auto* spectrum = app.add_subcommand("spectrum", "spiral spectrum P_{l1,l2}");
    auto* amplitude = app.add_subcommand("amplitude", "one amplitude C^{l1,l2}_{p1,p2}");
    AmplitudeArgs amp;
    amplitude->add_option("--l1", amp.l1)->required();
    amplitude->add_option("--l2", amp.l2)->required();
    amplitude->add_option("--p1", amp.p1)->check(CLI::NonNegativeNumber);
    amplitude->add_option("--p2", amp.p2)->check(CLI::NonNegativeNumber);
    amplitude->add_option("--method", amp.method, "quadrature | closed | both");
    amplitude->add_option("--route", amp.route, "quadrature route: reduced | brute");

    auto* cumulative = app.add_subcommand("cumulative", "cumulative radial weight vs p_max");
    int cum_l1 = 0, cum_l2 = 0;
    cumulative->add_option("--l1", cum_l1);
    cumulative->add_option("--l2", cum_l2);

    auto* entropy = app.add_subcommand("entropy", "entropy of entanglement and bandwidth");
    std::string scope = "restricted", source = "closed";
    double coverage = 0.99;
    entropy->add_option("--scope", scope, "restricted (p1 = p2 = 0) | full");
    entropy->add_option("--source", source, "closed | quadrature (restricted scope)");
    entropy->add_option("--coverage", coverage)->check(CLI::Range(0.0, 1.0));

    auto* figure = app.add_subcommand("figure", "figure data sets");
    std::string figure_id;
    figure->add_option("id", figure_id, "1a | 1b | 1c | 2a | 2b | 3")->required();

    auto* validate = app.add_subcommand("validate", "oracle and symmetry checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    }

    try {
        KeyValues kv;
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) throw IoError("cannot read config '" + config_path + "'");
            kv = parse_key_values(in, config_path);
        }
        for (const auto& [k, v] : overrides) {
            // a flag may switch parameter blocks or pump forms
            if (std::find(kPhysicalKeys.begin(), kPhysicalKeys.end(), k) != kPhysicalKeys.end())
                for (const auto& n : kNormalizedKeys) kv.erase(n);
            if (std::find(kNormalizedKeys.begin(), kNormalizedKeys.end(), k) != kNormalizedKeys.end())
                for (const auto& n : kPhysicalKeys) kv.erase(n);
            if (k == "pump_l0") kv.erase("pump_coeffs");
            if (k == "pump_coeffs") kv.erase("pump_l0");
            kv[k] = v;
        }
        if (jobs > 0) kv["jobs"] = std::to_string(jobs);

        const bool needs_params = !figure->parsed() && !validate->parsed();
        const RunConfig cfg = build_config(kv, needs_params);
        warn_validity(cfg, err);

        if (spectrum->parsed()) {
            emit(cmd_spectrum(cfg), cfg, "spectrum", out);
        } else if (amplitude->parsed()) {
            emit(cmd_amplitude(cfg, amp), cfg, "amplitude", out);
        } else if (cumulative->parsed()) {
            emit(cmd_cumulative(cfg, cum_l1, cum_l2), cfg, "cumulative", out);
        } else if (entropy->parsed()) {
            emit(cmd_entropy(cfg, scope, source, coverage), cfg, "entropy", out);
        } else if (figure->parsed()) {
            cmd_figure(cfg, figure_id, err);
        } else if (validate->parsed()) {
            bool pass = false;
            const Table t = cmd_validate(cfg, pass);
            emit(t, cfg, "validate", out);
            return pass ? kOk : kComputation;
        }
        return kOk;
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return kIo;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const RangeError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const UnsupportedMethodError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const ConvergenceError& e) {
        err << "error: " << e.what() << " (last estimate " << format_number(e.last_estimate().real()) << " "
            << format_number(e.last_estimate().imag()) << "i)\n";
        return kComputation;
    } catch (const TruncationError& e) {
        err << "error: " << e.what() << " (achieved " << format_number(e.achieved_fraction()) << ")\n";
        return kComputation;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kComputation;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kComputation;
    }
}

} // namespace spiral::cli
