#include "spiral/spectrum.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "spiral/errors.hpp"

namespace spiral {

namespace {

constexpr double kWeightFloor = 1e-14;

void check_truncation(int l_max, int p_max) {
    if (l_max < 0) throw RangeError("truncation: l_max must be >= 0");
    if (p_max < 0) throw RangeError("truncation: p_max must be >= 0");
}

struct Cell {
    WindingPair key;
    double weight;
};

// Cells sorted by weight, ties toward the centre of the distribution.
int coverage_count(std::vector<Cell> cells, double total, double coverage) {
    if (!(coverage > 0.0 && coverage < 1.0)) throw RangeError("bandwidth: coverage must lie in (0, 1)");
    if (cells.empty() || !(total > 0.0)) throw DomainError("bandwidth: empty distribution");
    std::stable_sort(cells.begin(), cells.end(), [](const Cell& u, const Cell& v) {
        if (u.weight != v.weight) return u.weight > v.weight;
        const int du = std::abs(u.key.first - u.key.second);
        const int dv = std::abs(v.key.first - v.key.second);
        if (du != dv) return du < dv;
        return u.key.first < v.key.first;
    });
    double acc = 0.0;
    int count = 0;
    for (const auto& c : cells) {
        acc += c.weight;
        ++count;
        // small slack so exact equal-weight cases are not pushed one cell further by rounding
        if (acc >= coverage * total * (1.0 - 1e-12)) return count;
    }
    return count;
}

void check_boundary(double boundary, double total, double coverage, int l_max) {
    if (boundary > (1.0 - coverage) * total) {
        const double achieved = 1.0 - boundary / total;
        throw TruncationError("bandwidth: rows at |l1| = " + std::to_string(l_max) + " carry " +
                                  std::to_string(boundary / total) + " of the captured weight; raise l_max",
                              achieved);
    }
}

} // namespace

SpiralSpectrum spiral_spectrum(const NormalizedParams& params, int l0, int l_max, int p_max,
                               const QuadratureConfig& cfg) {
    return spiral_spectrum(params, PumpSpec::single(l0), l_max, p_max, cfg);
}

SpiralSpectrum spiral_spectrum(const NormalizedParams& params, const PumpSpec& pump, int l_max, int p_max,
                               const QuadratureConfig& cfg) {
    check_truncation(l_max, p_max);
    SpiralSpectrum out;
    out.l_max = l_max;
    out.p_max = p_max;
    out.params = params;
    for (const auto& c : pump.components()) {
        out.pump_windings.push_back(c.winding);
        const double scale = std::norm(c.coeff);
        if (scale == 0.0) continue;
        const AmplitudeTable table = amplitude_table(params, c.winding, -l_max, l_max, p_max, cfg);
        for (int l1 = -l_max; l1 <= l_max; ++l1) {
            double p_sum = 0.0;
            for (int p1 = 0; p1 <= p_max; ++p1)
                for (int p2 = 0; p2 <= p_max; ++p2) p_sum += std::norm(table.at(l1, p1, p2).value);
            out.entries[{l1, c.winding - l1}] += scale * p_sum;
        }
    }
    for (const auto& [key, w] : out.entries) out.captured_norm += w;
    return out;
}

std::vector<double> cumulative_p_weight(int l1, int l2, int p_max, const NormalizedParams& params,
                                        const QuadratureConfig& cfg) {
    check_truncation(0, p_max);
    const AmplitudeTable table = amplitude_table(params, l1 + l2, l1, l1, p_max, cfg);
    std::vector<double> out(static_cast<std::size_t>(p_max) + 1);
    double acc = 0.0;
    for (int k = 0; k <= p_max; ++k) {
        // new shell: max(p1, p2) == k
        for (int j = 0; j < k; ++j)
            acc += std::norm(table.at(l1, k, j).value) + std::norm(table.at(l1, j, k).value);
        acc += std::norm(table.at(l1, k, k).value);
        out[k] = acc;
    }
    return out;
}

RestrictedState restricted_state(const NormalizedParams& params, int l0, int l_max, const RestrictedOptions& opts) {
    return restricted_state(params, PumpSpec::single(l0), l_max, opts);
}

RestrictedState restricted_state(const NormalizedParams& params, const PumpSpec& pump, int l_max,
                                 const RestrictedOptions& opts) {
    check_truncation(l_max, 0);
    if (!(opts.reference_norm > 0.0)) throw ConfigError("restricted state: reference norm must be positive");
    RestrictedState out;
    out.l_max = l_max;
    for (const auto& c : pump.components()) {
        const int m = c.winding;
        if (opts.source == CoefficientSource::closed_form) {
            for (int l1 = -l_max; l1 <= l_max; ++l1)
                out.coefficients[{l1, m - l1}] +=
                    c.coeff * closed_amplitude(ClosedFormInputs(m, l1, m - l1, params), opts.variant).value;
        } else {
            const AmplitudeTable table = amplitude_table(params, m, -l_max, l_max, 0, opts.quadrature);
            for (int l1 = -l_max; l1 <= l_max; ++l1) out.coefficients[{l1, m - l1}] += c.coeff * table.at(l1, 0, 0).value;
        }
    }
    for (const auto& [key, v] : out.coefficients) out.captured_weight += std::norm(v);
    out.subspace_fraction = out.captured_weight / opts.reference_norm;
    if (opts.renormalize) {
        if (!(out.captured_weight > 0.0)) throw DomainError("restricted state: zero weight, cannot renormalize");
        const double scale = 1.0 / std::sqrt(out.captured_weight);
        for (auto& [key, v] : out.coefficients) v *= scale;
        out.renormalized = true;
    }
    return out;
}

RestrictedState state_from_coefficients(std::map<WindingPair, cplx> coefficients) {
    RestrictedState out;
    out.coefficients = std::move(coefficients);
    for (const auto& [key, v] : out.coefficients) out.captured_weight += std::norm(v);
    if (!(out.captured_weight > 0.0)) throw DomainError("state: all coefficients vanish");
    const double scale = 1.0 / std::sqrt(out.captured_weight);
    for (auto& [key, v] : out.coefficients) v *= scale;
    out.renormalized = true;
    out.subspace_fraction = out.captured_weight;
    return out;
}

std::vector<double> schmidt_weights(const RestrictedState& state) {
    if (state.coefficients.empty()) throw DomainError("schmidt weights: empty state");
    std::set<int> rows, cols;
    for (const auto& [key, v] : state.coefficients) {
        rows.insert(key.first);
        cols.insert(key.second);
    }
    std::vector<double> w;
    if (rows.size() == state.coefficients.size() && cols.size() == state.coefficients.size()) {
        for (const auto& [key, v] : state.coefficients) w.push_back(std::norm(v));
    } else {
        const std::vector<int> r(rows.begin(), rows.end());
        const std::vector<int> c(cols.begin(), cols.end());
        Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(c.size()));
        for (const auto& [key, v] : state.coefficients) {
            const auto i = std::lower_bound(r.begin(), r.end(), key.first) - r.begin();
            const auto j = std::lower_bound(c.begin(), c.end(), key.second) - c.begin();
            m(i, j) = v;
        }
        const Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m);
        for (Eigen::Index k = 0; k < svd.singularValues().size(); ++k) {
            const double s = svd.singularValues()(k);
            w.push_back(s * s);
        }
    }
    double total = 0.0;
    for (double x : w) total += x;
    if (!(total > 0.0)) throw DomainError("schmidt weights: state has zero norm");
    std::vector<double> out;
    for (double x : w)
        if (x / total >= kWeightFloor) out.push_back(x / total);
    std::sort(out.begin(), out.end(), std::greater<>());
    return out;
}

std::vector<double> full_state_schmidt_weights(const NormalizedParams& params, int l0, int l_max, int p_max,
                                               const QuadratureConfig& cfg) {
    check_truncation(l_max, p_max);
    const AmplitudeTable table = amplitude_table(params, l0, -l_max, l_max, p_max, cfg);
    const int P = p_max + 1;
    std::vector<double> w;
    for (int l1 = -l_max; l1 <= l_max; ++l1) {
        Eigen::MatrixXcd m(P, P);
        for (int p1 = 0; p1 < P; ++p1)
            for (int p2 = 0; p2 < P; ++p2) m(p1, p2) = table.at(l1, p1, p2).value;
        const Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m);
        for (Eigen::Index k = 0; k < svd.singularValues().size(); ++k) w.push_back(std::pow(svd.singularValues()(k), 2));
    }
    double total = 0.0;
    for (double x : w) total += x;
    if (!(total > 0.0)) throw DomainError("schmidt weights: state has zero norm");
    std::vector<double> out;
    for (double x : w)
        if (x / total >= kWeightFloor) out.push_back(x / total);
    std::sort(out.begin(), out.end(), std::greater<>());
    return out;
}

double entropy_bits(std::span<const double> weights) {
    if (weights.empty()) throw DomainError("entropy: no weights");
    double e = 0.0;
    for (double w : weights) {
        if (w < 0.0) throw DomainError("entropy: negative weight");
        if (w >= kWeightFloor) e -= w * std::log2(w);
    }
    return std::max(e, 0.0);
}

double participation_number(std::span<const double> weights) {
    if (weights.empty()) throw DomainError("schmidt number: no weights");
    double s = 0.0;
    for (double w : weights) s += w * w;
    return 1.0 / s;
}

double entanglement_entropy(const RestrictedState& state) {
    if (state.coefficients.empty()) throw DomainError("entropy: empty state");
    if (!state.renormalized) throw DomainError("entropy: state must be renormalized");
    const auto w = schmidt_weights(state);
    return entropy_bits(w);
}

double schmidt_number(const RestrictedState& state) {
    if (state.coefficients.empty()) throw DomainError("schmidt number: empty state");
    if (!state.renormalized) throw DomainError("schmidt number: state must be renormalized");
    const auto w = schmidt_weights(state);
    return participation_number(w);
}

int spiral_bandwidth(const SpiralSpectrum& s, double coverage) {
    std::vector<Cell> cells;
    double boundary = 0.0;
    for (const auto& [key, w] : s.entries) {
        cells.push_back({key, w});
        if (std::abs(key.first) == s.l_max) boundary += w;
    }
    const int n = coverage_count(cells, s.captured_norm, coverage);
    check_boundary(boundary, s.captured_norm, coverage, s.l_max);
    return n;
}

int spiral_bandwidth(const RestrictedState& state, double coverage) {
    std::vector<Cell> cells;
    double total = 0.0;
    double boundary = 0.0;
    for (const auto& [key, v] : state.coefficients) {
        cells.push_back({key, std::norm(v)});
        total += std::norm(v);
        if (state.l_max && std::abs(key.first) == *state.l_max) boundary += std::norm(v);
    }
    const int n = coverage_count(cells, total, coverage);
    if (state.l_max) check_boundary(boundary, total, coverage, *state.l_max);
    return n;
}

} // namespace spiral
