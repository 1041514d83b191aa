// p1aug: energy levels, augmentation factors, DEER spectra and Rabi traces of
// the diamond P1 center from the command line.

#include "p1aug/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

namespace {

using namespace p1aug;
using namespace p1aug::cli;

std::string key_help(const KeySpec& k) {
    std::string h(k.help);
    h += " [";
    h += k.unit;
    h += "] (default: ";
    h += k.default_value.empty() ? "none" : std::string(k.default_value);
    h += ")";
    return h;
}

int run(const std::string& command, const std::string& config_path, const ValueMap& overrides) {
    std::map<std::string, ValueMap> file;
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw ConfigError("cannot open config file '" + config_path + "'");
        file = parse_config_text(in, config_path);
    }
    const RunConfig cfg = RunConfig::from_values(resolve_values(command, file, overrides));

    OutputTable table;
    if (command == "levels") {
        table = cmd_levels(cfg);
    } else if (command == "alpha") {
        table = cmd_alpha(cfg);
    } else if (command == "deer") {
        table = cmd_deer(cfg);
    } else if (command == "rabi-sim") {
        table = cmd_rabi_sim(cfg);
    } else {
        if (cfg.input.empty()) throw ConfigError("config key 'input': rabi-fit needs a trace file");
        std::ifstream in(cfg.input);
        if (!in) throw InputDataError("cannot open trace file '" + cfg.input + "'");
        table = cmd_rabi_fit(cfg, read_trace_csv(in, cfg.input));
    }

    if (cfg.output == "-") {
        write_table(table, cfg.json, std::cout);
    } else {
        std::ofstream out(cfg.output, std::ios::binary);
        if (!out) throw ConfigError("cannot open output file '" + cfg.output + "'");
        write_table(table, cfg.json, out);
    }
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"P1 center spin model: levels, augmentation, DEER and Rabi fitting"};
    app.require_subcommand(1);

    std::string config_path;
    std::map<std::string, std::optional<std::string>> flag_values;
    for (const auto& k : kKeys) flag_values[std::string(k.name)];

    const std::map<std::string, std::string> descriptions{
        {"levels", "labeled energy levels over a field sweep"},
        {"alpha", "augmentation factor of one transition over a field sweep"},
        {"deer", "DEER stick spectrum and broadened curve at one field"},
        {"rabi-sim", "synthetic nuclear Rabi trace"},
        {"rabi-fit", "fit the damped cos^2 model to a trace file"},
    };
    for (const auto& name : kCommands) {
        auto* sub = app.add_subcommand(std::string(name), descriptions.at(std::string(name)));
        sub->add_option("-c,--config", config_path, "config file (key = value, sections [common], [" +
                                                        std::string(name) + "])");
        for (const auto& k : kKeys) sub->add_option("--" + std::string(k.name), flag_values[std::string(k.name)],
                                                    key_help(k));
        if (name == "rabi-fit") sub->add_option("trace", flag_values["input"], "trace CSV (same as --input)");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    ValueMap overrides;
    for (const auto& [k, v] : flag_values)
        if (v) overrides[k] = *v;

    try {
        return run(command, config_path, overrides);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const InputDataError& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return kInputDataError;
    } catch (const TrackingFailure& e) {
        std::cerr << "tracking failure at B = " << e.field_gauss() << " G: " << e.what() << '\n';
        return kNumericalError;
    } catch (const NumericalFailure& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kNumericalError;
    } catch (const InvalidInput& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    }
}
