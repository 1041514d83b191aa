#pragma once

// Configuration resolution, command implementations and CSV/JSON emission for
// the p1aug command-line tool. Commands are pure functions of the resolved
// configuration (plus an input trace for rabi-fit) returning an OutputTable.

#include "p1aug/augmentation.hpp"
#include "p1aug/deer.hpp"
#include "p1aug/errors.hpp"
#include "p1aug/p1_model.hpp"
#include "p1aug/rabi.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <variant>
#include <vector>

namespace p1aug::cli {

inline constexpr std::string_view kToolName = "p1aug";
inline constexpr std::string_view kToolVersion = "1.0.0";

enum ExitCode : int { kOk = 0, kConfigError = 2, kNumericalError = 3, kInputDataError = 4 };

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InputDataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct KeySpec {
    std::string_view name;
    std::string_view default_value;
    std::string_view unit;
    std::string_view help;
};

// Registry order is also the provenance echo order.
inline constexpr std::array kKeys{
    KeySpec{"gamma_e", "-2.8", "MHz/G", "electron gyromagnetic ratio / 2pi (signed)"},
    KeySpec{"gamma_n", "0.0003077", "MHz/G", "14N gyromagnetic ratio / 2pi (signed)"},
    KeySpec{"a_par", "114", "MHz", "axial hyperfine coupling / 2pi"},
    KeySpec{"a_perp", "81.34", "MHz", "transverse hyperfine coupling / 2pi"},
    KeySpec{"q", "-4.2", "MHz", "nuclear quadrupole coupling / 2pi"},
    KeySpec{"b_min", "0", "G", "first field of the sweep grid"},
    KeySpec{"b_max", "100", "G", "last field of the sweep grid"},
    KeySpec{"points", "11", "count", "sweep grid points (1 = b_min only)"},
    KeySpec{"field", "35", "G", "static field for deer and rabi-sim (omega_mhz = auto)"},
    KeySpec{"orientation", "both", "on|off|both", "orientation classes to evaluate"},
    KeySpec{"b_rf", "1", "G", "rf drive amplitude"},
    KeySpec{"polarization", "1,0,0", "unit vector", "rf polarization in the P1 frame"},
    KeySpec{"transition", "de", "label pair", "transition for alpha and rabi-sim, e.g. ab, de"},
    KeySpec{"f_min", "0", "MHz", "lower edge of the deer frequency window"},
    KeySpec{"f_max", "450", "MHz", "upper edge of the deer frequency window"},
    KeySpec{"samples", "901", "count", "deer curve samples"},
    KeySpec{"linewidth", "1", "MHz", "deer line FWHM"},
    KeySpec{"lineshape", "lorentzian", "lorentzian|gaussian", "deer line profile"},
    KeySpec{"amplitude_floor", "0", "1", "deer sticks below this relative amplitude are dropped"},
    KeySpec{"s0", "0.01", "contrast", "rabi-sim oscillation amplitude"},
    KeySpec{"t_d", "5", "us", "rabi-sim decay time"},
    KeySpec{"n", "1.5", "1", "rabi-sim stretch exponent"},
    KeySpec{"omega_mhz", "1", "MHz or auto", "rabi-sim Rabi frequency Omega/2pi; auto = alpha * gamma_n * b_rf"},
    KeySpec{"baseline", "0.99", "contrast", "rabi-sim contrast offset"},
    KeySpec{"t_max", "10", "us", "rabi-sim last sample time"},
    KeySpec{"time_points", "200", "count", "rabi-sim samples"},
    KeySpec{"noise_sigma", "0", "contrast", "rabi-sim Gaussian noise standard deviation"},
    KeySpec{"seed", "1", "integer", "rabi-sim noise seed"},
    KeySpec{"fix_n", "free", "1 or free", "rabi-fit: hold the stretch exponent fixed"},
    KeySpec{"input", "", "path", "rabi-fit trace CSV with header time_us,signal"},
    KeySpec{"output", "-", "path", "output file, - for stdout"},
    KeySpec{"format", "csv", "csv|json", "output format"},
};

inline constexpr std::array<std::string_view, 5> kCommands{"levels", "deer", "alpha", "rabi-sim", "rabi-fit"};

inline bool is_known_key(std::string_view k) {
    return std::any_of(kKeys.begin(), kKeys.end(), [&](const KeySpec& s) { return s.name == k; });
}

inline bool is_known_command(std::string_view c) {
    return std::find(kCommands.begin(), kCommands.end(), c) != kCommands.end();
}

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

using ValueMap = std::map<std::string, std::string>;

/// Parses the flat key = value config format. Lines before any [section]
/// belong to [common]; '#' starts a comment line.
inline std::map<std::string, ValueMap> parse_config_text(std::istream& in, const std::string& source) {
    std::map<std::string, ValueMap> sections;
    std::string section = "common";
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        const std::string where = source + ":" + std::to_string(lineno);
        if (t.front() == '[') {
            if (t.back() != ']') throw ConfigError(where + ": malformed section header '" + t + "'");
            section = trim(std::string_view(t).substr(1, t.size() - 2));
            if (section != "common" && !is_known_command(section))
                throw ConfigError(where + ": unknown section [" + section + "]");
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw ConfigError(where + ": expected key = value, got '" + t + "'");
        const std::string key = trim(std::string_view(t).substr(0, eq));
        if (!is_known_key(key)) throw ConfigError(where + ": unknown config key '" + key + "'");
        sections[section][key] = trim(std::string_view(t).substr(eq + 1));
    }
    return sections;
}

/// defaults <- [common] <- [command] <- overrides
inline ValueMap resolve_values(const std::string& command, const std::map<std::string, ValueMap>& file,
                               const ValueMap& overrides) {
    if (!is_known_command(command)) throw ConfigError("unknown command '" + command + "'");
    ValueMap v;
    for (const auto& k : kKeys) v[std::string(k.name)] = std::string(k.default_value);
    for (const char* sec : {"common"}) {
        if (auto it = file.find(sec); it != file.end())
            for (const auto& [k, val] : it->second) v[k] = val;
    }
    if (auto it = file.find(command); it != file.end())
        for (const auto& [k, val] : it->second) v[k] = val;
    for (const auto& [k, val] : overrides) {
        if (!is_known_key(k)) throw ConfigError("unknown config key '" + k + "'");
        v[k] = val;
    }
    return v;
}

inline double parse_double(const std::string& key, const std::string& text) {
    double v = 0.0;
    const char* first = text.data();
    const char* last = first + text.size();
    if (!text.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last || text.empty() || !std::isfinite(v))
        throw ConfigError("config key '" + key + "': expected a finite number, got '" + text + "'");
    return v;
}

inline std::uint64_t parse_count(const std::string& key, const std::string& text) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty())
        throw ConfigError("config key '" + key + "': expected a nonnegative integer, got '" + text + "'");
    return v;
}

struct RunConfig {
    P1Parameters params;
    double b_min = 0.0;
    double b_max = 100.0;
    std::size_t points = 11;
    double field = 35.0;
    std::vector<OrientationClass> orientations;
    RfDrive drive;
    Transition transition{Label::d, Label::e};
    SpectrumConfig spectrum;
    DampedSinusoidParams rabi;
    std::optional<double> omega_mhz;   // empty = auto
    double t_max = 10.0;
    std::size_t time_points = 200;
    double noise_sigma = 0.0;
    std::uint64_t seed = 1;
    std::optional<double> fix_n;
    std::string input;
    std::string output = "-";
    bool json = false;
    ValueMap resolved;   // echo of every key

    static RunConfig from_values(const ValueMap& v) {
        auto get = [&](std::string_view k) -> const std::string& { return v.at(std::string(k)); };
        auto num = [&](std::string_view k) { return parse_double(std::string(k), get(k)); };
        auto count = [&](std::string_view k) { return static_cast<std::size_t>(parse_count(std::string(k), get(k))); };

        RunConfig c;
        c.resolved = v;
        c.params = {num("gamma_e"), num("gamma_n"), num("a_par"), num("a_perp"), num("q")};
        c.b_min = num("b_min");
        c.b_max = num("b_max");
        c.points = count("points");
        if (c.points == 0) throw ConfigError("config key 'points': must be >= 1");
        if (c.b_min < 0.0) throw ConfigError("config key 'b_min': must be >= 0");
        if (c.points > 1 && !(c.b_max > c.b_min)) throw ConfigError("config key 'b_max': must exceed b_min");
        c.field = num("field");
        if (c.field < 0.0) throw ConfigError("config key 'field': must be >= 0");

        const std::string& o = get("orientation");
        if (o == "on") c.orientations = {OrientationClass::on_axis()};
        else if (o == "off") c.orientations = {OrientationClass::off_axis()};
        else if (o == "both") c.orientations = {OrientationClass::on_axis(), OrientationClass::off_axis()};
        else throw ConfigError("config key 'orientation': expected on, off or both, got '" + o + "'");

        c.drive.amplitude = num("b_rf");
        if (!(c.drive.amplitude > 0.0)) throw ConfigError("config key 'b_rf': must be > 0");
        {
            std::array<double, 3> pol{};
            std::stringstream ss(get("polarization"));
            std::string part;
            std::size_t k = 0;
            while (std::getline(ss, part, ',')) {
                if (k == 3) throw ConfigError("config key 'polarization': expected three components");
                pol[k++] = parse_double("polarization", trim(part));
            }
            if (k != 3) throw ConfigError("config key 'polarization': expected three components");
            try {
                c.drive.polarization = RfDrive::normalized(pol);
            } catch (const InvalidInput&) {
                throw ConfigError("config key 'polarization': must be a nonzero vector");
            }
        }
        try {
            c.transition = parse_transition(get("transition"));
        } catch (const InvalidInput& e) {
            throw ConfigError(std::string("config key 'transition': ") + e.what());
        }

        c.spectrum.f_min = num("f_min");
        c.spectrum.f_max = num("f_max");
        c.spectrum.samples = count("samples");
        c.spectrum.linewidth = num("linewidth");
        const std::string& shape = get("lineshape");
        if (shape == "lorentzian") c.spectrum.lineshape = Lineshape::Lorentzian;
        else if (shape == "gaussian") c.spectrum.lineshape = Lineshape::Gaussian;
        else throw ConfigError("config key 'lineshape': expected lorentzian or gaussian, got '" + shape + "'");
        c.spectrum.amplitude_floor = num("amplitude_floor");
        try {
            c.spectrum.validate();
        } catch (const InvalidInput& e) {
            throw ConfigError(std::string("deer window: ") + e.what());
        }

        c.rabi.s0 = num("s0");
        c.rabi.t_d = num("t_d");
        c.rabi.n = num("n");
        c.rabi.baseline = num("baseline");
        if (get("omega_mhz") != "auto") c.omega_mhz = num("omega_mhz");
        c.t_max = num("t_max");
        c.time_points = count("time_points");
        c.noise_sigma = num("noise_sigma");
        c.seed = parse_count("seed", get("seed"));
        if (get("fix_n") != "free") c.fix_n = num("fix_n");
        if (!(c.rabi.t_d > 0.0)) throw ConfigError("config key 't_d': must be > 0");
        if (!(c.rabi.n > 0.0)) throw ConfigError("config key 'n': must be > 0");
        if (!(c.t_max > 0.0)) throw ConfigError("config key 't_max': must be > 0");
        if (c.time_points < 8) throw ConfigError("config key 'time_points': must be >= 8");
        if (c.noise_sigma < 0.0) throw ConfigError("config key 'noise_sigma': must be >= 0");
        if (c.fix_n && !(*c.fix_n > 0.0)) throw ConfigError("config key 'fix_n': must be > 0 or 'free'");

        c.input = get("input");
        c.output = get("output");
        const std::string& fmt = get("format");
        if (fmt == "json") c.json = true;
        else if (fmt != "csv") throw ConfigError("config key 'format': expected csv or json, got '" + fmt + "'");
        return c;
    }

    std::vector<double> grid() const {
        if (points == 1) return {b_min};
        return linear_grid(b_min, b_max, points);
    }
};

using Cell = std::variant<double, long long, std::string>;

/// Shortest text that parses back to the same double.
inline std::string format_number(double v) {
    if (v == 0.0) v = 0.0;   // drop negative zero
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string format_cell(const Cell& c) {
    if (const auto* d = std::get_if<double>(&c)) return format_number(*d);
    if (const auto* i = std::get_if<long long>(&c)) return std::to_string(*i);
    return std::get<std::string>(c);
}

struct OutputTable {
    std::string command;
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
    ValueMap config;

    void add_row(std::vector<Cell> row) {
        if (row.size() != columns.size()) throw std::logic_error("OutputTable: row width mismatch");
        rows.push_back(std::move(row));
    }
};

inline void write_csv(const OutputTable& t, std::ostream& os) {
    os << "# " << kToolName << ' ' << kToolVersion << '\n';
    os << "# command = " << t.command << '\n';
    for (const auto& k : kKeys) {
        const auto it = t.config.find(std::string(k.name));
        if (it != t.config.end()) os << "# " << k.name << " = " << it->second << '\n';
    }
    for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << t.columns[i];
    os << '\n';
    for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << format_cell(row[i]);
        os << '\n';
    }
}

inline void write_json(const OutputTable& t, std::ostream& os) {
    nlohmann::ordered_json j;
    j["tool"] = std::string(kToolName);
    j["version"] = std::string(kToolVersion);
    j["command"] = t.command;
    nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
    for (const auto& k : kKeys) {
        const auto it = t.config.find(std::string(k.name));
        if (it != t.config.end()) cfg[std::string(k.name)] = it->second;
    }
    j["config"] = cfg;
    j["columns"] = t.columns;
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& row : t.rows) {
        nlohmann::ordered_json r = nlohmann::ordered_json::array();
        for (const auto& c : row) {
            if (const auto* d = std::get_if<double>(&c)) {
                r.push_back(*d);
            } else if (const auto* i = std::get_if<long long>(&c)) {
                r.push_back(*i);
            } else {
                r.push_back(std::get<std::string>(c));
            }
        }
        rows.push_back(std::move(r));
    }
    j["rows"] = std::move(rows);
    os << j.dump(1) << '\n';
}

/// Reads the `# key = value` provenance lines of an emitted CSV back into a
/// (command, overrides) pair suitable for re-running the computation.
inline std::pair<std::string, ValueMap> parse_provenance(std::istream& in) {
    std::string command;
    ValueMap values;
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("# ", 0) != 0) break;
        const auto eq = line.find(" = ");
        if (eq == std::string::npos) continue;
        const std::string key = line.substr(2, eq - 2);
        const std::string val = line.substr(eq + 3);
        if (key == "command") command = val;
        else if (is_known_key(key)) values[key] = val;
    }
    return {command, values};
}

inline RabiTrace read_trace_csv(std::istream& in, const std::string& source) {
    RabiTrace trace;
    std::string line;
    int lineno = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        const std::string where = source + " line " + std::to_string(lineno);
        if (!header) {
            if (t != "time_us,signal")
                throw InputDataError(where + ": expected header 'time_us,signal', got '" + t + "'");
            header = true;
            continue;
        }
        const auto comma = t.find(',');
        if (comma == std::string::npos || t.find(',', comma + 1) != std::string::npos)
            throw InputDataError(where + ": expected exactly 2 columns");
        const std::array<std::string, 2> fields{trim(std::string_view(t).substr(0, comma)),
                                                trim(std::string_view(t).substr(comma + 1))};
        std::array<double, 2> vals{};
        for (std::size_t k = 0; k < 2; ++k) {
            const auto& f = fields[k];
            const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), vals[k]);
            if (f.empty() || ec != std::errc{} || ptr != f.data() + f.size())
                throw InputDataError(where + ", column " + std::to_string(k + 1) + " (" +
                                     (k == 0 ? "time_us" : "signal") + "): cannot parse '" + f + "'");
        }
        trace.times.push_back(vals[0]);
        trace.signal.push_back(vals[1]);
    }
    if (!header) throw InputDataError(source + ": missing header 'time_us,signal'");
    try {
        trace.validate();
    } catch (const InvalidInput& e) {
        throw InputDataError(source + ": " + e.what());
    }
    return trace;
}

inline OutputTable make_table(const RunConfig& c, std::string command, std::vector<std::string> columns) {
    OutputTable t;
    t.command = std::move(command);
    t.columns = std::move(columns);
    t.config = c.resolved;
    return t;
}

inline OutputTable cmd_levels(const RunConfig& c) {
    auto table = make_table(c, "levels",
                            {"field_G", "orientation", "label", "energy_MHz", "asymptotic_mS", "asymptotic_mI"});
    const auto grid = c.grid();
    std::vector<std::vector<LabeledEigensystem>> per_orientation;
    for (const auto& o : c.orientations) per_orientation.push_back(continue_labels(c.params, o, grid));
    for (std::size_t k = 0; k < grid.size(); ++k) {
        for (const auto& systems : per_orientation) {
            const auto& sys = systems[k];
            for (Label l : kAllLabels) {
                const SpinId id = sys.asymptotic_id[index(l)];
                table.add_row({grid[k], sys.orientation.name(), std::string(1, to_char(l)), sys.energy(l), id.ms(),
                               static_cast<long long>(id.mi)});
            }
        }
    }
    return table;
}

inline OutputTable cmd_alpha(const RunConfig& c) {
    auto table = make_table(c, "alpha",
                            {"field_G", "orientation", "transition", "alpha_raw", "alpha_norm", "alpha_rel_max"});
    const auto grid = c.grid();
    std::vector<AugmentationCurve> curves;
    for (const auto& o : c.orientations) curves.push_back(alpha_sweep(c.params, grid, o, c.drive, c.transition));
    for (std::size_t k = 0; k < grid.size(); ++k) {
        for (const auto& curve : curves) {
            const auto& s = curve.samples[k];
            table.add_row({s.field, curve.orientation.name(), curve.transition.name(), s.alpha_raw, s.alpha_norm,
                           s.relative_to_max});
        }
    }
    return table;
}

inline OutputTable cmd_deer(const RunConfig& c) {
    auto table = make_table(c, "deer", {"record", "frequency_MHz", "amplitude", "transition", "class", "orientation"});
    const auto sticks = stick_spectrum(c.params, c.field, c.drive);
    const auto spectrum = broaden(sticks, c.spectrum);
    for (const auto& l : spectrum.sticks)
        table.add_row({std::string("stick"), l.frequency, l.amplitude, l.transition.name(), to_string(l.kind),
                       l.orientation.name()});
    for (const auto& [f, y] : spectrum.curve)
        table.add_row({std::string("curve"), f, y, std::string(), std::string(), std::string()});
    return table;
}

/// Omega/2pi in MHz for rabi-sim: explicit, or alpha(transition, field) * gamma_n * b_rf.
inline double resolve_rabi_frequency_mhz(const RunConfig& c) {
    if (c.omega_mhz) return *c.omega_mhz;
    if (c.orientations.size() != 1)
        throw ConfigError("config key 'orientation': omega_mhz = auto needs a single orientation (on or off)");
    const auto sys = label_states(c.params, c.field, c.orientations.front());
    const auto a = augmentation_factor(c.params, sys, c.drive, c.transition);
    return rabi_frequency(a.alpha_raw, c.params.gamma_n, c.drive.amplitude);
}

inline OutputTable cmd_rabi_sim(const RunConfig& c) {
    auto table = make_table(c, "rabi-sim", {"time_us", "signal"});
    DampedSinusoidParams p = c.rabi;
    p.omega = kTwoPi * resolve_rabi_frequency_mhz(c);
    const auto times = uniform_times(c.t_max, c.time_points);
    const auto trace = simulate_trace(p, times, c.noise_sigma, c.seed);
    for (std::size_t k = 0; k < times.size(); ++k) table.add_row({trace.times[k], trace.signal[k]});
    return table;
}

inline OutputTable cmd_rabi_fit(const RunConfig& c, const RabiTrace& trace) {
    auto table = make_table(c, "rabi-fit",
                            {"s0", "s0_err", "t_d_us", "t_d_err", "n", "n_err", "omega_MHz", "omega_err_MHz",
                             "baseline", "baseline_err", "residual_rms", "converged", "iterations"});
    FitOptions opts;
    opts.fix_n = c.fix_n;
    const auto r = fit_damped_sinusoid(trace, opts);
    table.add_row({r.params.s0, r.std_errors.s0, r.params.t_d, r.std_errors.t_d, r.params.n, r.std_errors.n,
                   r.params.omega / kTwoPi, r.std_errors.omega / kTwoPi, r.params.baseline, r.std_errors.baseline,
                   r.residual_rms, static_cast<long long>(r.converged ? 1 : 0),
                   static_cast<long long>(r.iterations)});
    return table;
}

inline void write_table(const OutputTable& t, bool json, std::ostream& os) {
    if (json) write_json(t, os);
    else write_csv(t, os);
}

} // namespace p1aug::cli
