#pragma once

// Command-line front end. Everything lives in the library so the tests can
// drive it without spawning processes.

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "spiral/closed_form.hpp"
#include "spiral/physics.hpp"
#include "spiral/quadrature.hpp"

namespace spiral::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kComputation = 2, kIo = 3 };

enum class Format { csv, json };

using KeyValues = std::map<std::string, std::string>;

/// Every key accepted in a config file or as a --key override.
const std::vector<std::string>& known_keys();

/// Flat `key = value` lines; `#` and `;` start comments, `[section]` lines
/// are ignored. Unknown or repeated keys raise ConfigError.
KeyValues parse_key_values(std::istream& in, const std::string& origin);

struct PhysicalBlock {
    double lambda_p_m = 0.0;
    double L_m = 0.0;
    double w_p_m = 0.0;
    double w0_m = 0.0;
};

struct RunConfig {
    std::optional<PhysicalBlock> physical;
    std::optional<std::pair<double, double>> normalized; // (wbar_p, wbar_0)
    double n_p = 1.0;
    PumpSpec pump = PumpSpec::single(0);
    bool pump_given = false;
    std::optional<int> l_max;
    std::optional<int> p_max;
    QuadratureConfig quadrature;
    ClosedFormVariant variant = ClosedFormVariant::corrected;
    Format format = Format::csv;
    std::string out; // empty: stdout or the output-directory default

    bool has_params() const { return physical.has_value() || normalized.has_value(); }
    /// ConfigError when no parameter block is present.
    NormalizedParams params() const;
    /// pi n_p wbar_p
    double validity_figure() const;
};

/// Builds and validates a config. Exactly one of the physical
/// (lambda_p_m, L_m, w_p_m, w0_m) and normalized (wbar_p, wbar_0) blocks
/// may be present; `require_params` makes one mandatory.
RunConfig build_config(const KeyValues& kv, bool require_params);

/// "m:re:im,..." -> normalized pump.
PumpSpec parse_pump_coeffs(const std::string& text);

/// 12 significant digits, e.g. 1.23456789012e-03.
std::string format_number(double v);
/// Principal angle in (-pi, pi].
double principal_phase(cplx z);

using Cell = std::variant<long long, double, std::string>;

struct Table {
    std::vector<std::pair<std::string, std::string>> meta; // echoed as "# key = value"
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
};

void write_csv(const Table& t, std::ostream& out);
void write_json(const Table& t, std::ostream& out);

/// Entry point used by the executable. Returns an ExitCode.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Environment variable naming the default output directory.
inline constexpr const char* kOutputDirEnv = "SPIRAL_OUTPUT_DIR";

} // namespace spiral::cli
