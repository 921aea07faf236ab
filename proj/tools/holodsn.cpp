#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "holodsn/cli/commands.hpp"

using namespace holodsn;

int main(int argc, char** argv) {
    CLI::App app{"holodsn: simulate, reconstruct, descatter and score particle holograms"};
    app.require_subcommand(0, 1);
    std::string config_path;
    std::vector<std::string> sets;
    bool list_keys = false;
    app.add_option("-c,--config", config_path, "key = value config file");
    app.add_option("--set", sets, "override any key: --set key=value (repeatable)");
    app.add_flag("--list-keys", list_keys, "print every config key with its default and exit");

    // One flag per key, with underscores spelled as dashes.
    std::map<std::string, std::string> flag_values;
    for (const auto& k : cli::config_keys()) {
        std::string flag = k.name;
        for (auto& ch : flag) ch = ch == '_' ? '-' : ch;
        app.add_option("--" + flag, flag_values[k.name], k.doc);
    }

    std::string cmd;
    for (const auto& name : cli::command_names()) {
        app.add_subcommand(name, "run the " + name + " stage")->fallthrough();
    }
    app.add_subcommand("all", "run every stage in order")->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }
    if (list_keys) {
        std::cout << cli::config_text(cli::RunConfig{});
        return 0;
    }
    for (auto* sub : app.get_subcommands()) cmd = sub->get_name();
    if (cmd.empty()) {
        std::cerr << app.help();
        return 2;
    }

    try {
        std::vector<std::pair<std::string, std::string>> flags;
        for (const auto& k : cli::config_keys()) {
            std::string flag = k.name;
            for (auto& ch : flag) ch = ch == '_' ? '-' : ch;
            if (app.count("--" + flag) > 0) flags.emplace_back(k.name, flag_values[k.name]);
        }
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
            flags.emplace_back(cli::detail::trim(s.substr(0, eq)), cli::detail::trim(s.substr(eq + 1)));
        }
        const auto cfg = cli::load_config(config_path, flags);
        cli::run_command(cmd, cfg, std::cerr);
    } catch (const std::exception& e) {
        std::cerr << "holodsn " << cmd << ": " << e.what() << "\n";
        return cli::exit_code(e);
    }
    return 0;
}
