// optoweak: figure/table regeneration, sweeps and the verification suite.
//
// Exit codes: 0 success, 1 verification failure, 2 config error,
// 3 numerical or truncation error. Failures print one line to stderr:
//   optoweak: error[<kind>]: <message>

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "optoweak/acceptance.hpp"
#include "optoweak/config.hpp"
#include "optoweak/output.hpp"
#include "optoweak/sweep.hpp"

namespace {

using namespace optoweak;

struct Options {
    std::string config;
    std::string out;
    std::string svg;
    std::string engine;
    int workers = 0;
};

int fail(const std::string& kind, const std::string& msg, int code) {
    std::string line = msg;
    for (char& c : line) {
        if (c == '\n' || c == '\r') c = ' ';
    }
    std::cerr << "optoweak: error[" << kind << "]: " << line << '\n';
    return code;
}

void print_warnings(const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) std::cerr << "optoweak: warning: " << w << '\n';
}

/// Writes via `emit` to the chosen path, or stdout when the path is empty.
template <class Emit>
void with_output(const std::string& path, Emit&& emit) {
    if (path.empty()) {
        emit(std::cout);
        std::cout.flush();
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open output file '" + path + "'");
    emit(f);
    if (!f) throw ConfigError("write failed for '" + path + "'");
}

SweepConfig resolve(Command cmd, const Options& o) {
    SweepConfig cfg = o.config.empty() ? SweepConfig{} : load_config(o.config);
    if (cfg.mode && *cfg.mode != cmd) {
        throw ConfigError(std::string("config mode '") + to_string(*cfg.mode) + "' does not match command '" +
                          to_string(cmd) + "'");
    }
    cfg.mode = cmd;
    if (!o.engine.empty()) cfg.engine = engine_from_string(o.engine);
    if (!o.out.empty()) cfg.csv = o.out;
    if (!o.svg.empty()) cfg.svg = o.svg;
    if (o.workers > 0) {
        cfg.workers = static_cast<unsigned>(o.workers);
    } else if (o.workers < 0) {
        throw ConfigError("--workers must be >= 1");
    }
    return cfg;
}

void write_table(const SweepConfig& cfg, const Table& t) {
    with_output(cfg.csv, [&](std::ostream& os) { write_csv(os, t); });
}

void write_plot(const SweepConfig& cfg, const std::string& title, const std::string& x_name, const Table& t,
                const std::vector<Series>& series) {
    if (cfg.svg.empty()) return;
    std::ofstream f(cfg.svg, std::ios::binary);
    if (!f) throw ConfigError("cannot open svg file '" + cfg.svg + "'");
    write_svg(f, title, x_name, t.numbers(x_name), series);
}

int run(Command cmd, const Options& o) {
    const SweepConfig cfg = resolve(cmd, o);
    std::vector<std::string> warnings;
    switch (cmd) {
        case Command::table1: {
            write_table(cfg, table1(cfg));
            return 0;
        }
        case Command::figure2: {
            const Table t = figure2(cfg, &warnings);
            print_warnings(warnings);
            write_table(cfg, t);
            write_plot(cfg, "<q>/sigma versus delta", "delta", t, figure2_series(t));
            return 0;
        }
        case Command::figure3: {
            const Table t = figure3(cfg);
            write_table(cfg, t);
            std::vector<Series> s;
            for (std::size_t c = 1; c + 1 < t.header.size(); ++c) s.push_back({t.header[c], t.numbers(t.header[c])});
            write_plot(cfg, "|alpha|^2 versus delta", "delta", t, s);
            return 0;
        }
        case Command::sweep: {
            if (!cfg.svg.empty() && cfg.axes.size() != 1) throw ConfigError("svg output needs exactly one sweep axis");
            Table t;
            with_output(cfg.csv, [&](std::ostream& os) { t = run_sweep(cfg, os, &warnings); });
            print_warnings(warnings);
            if (!cfg.svg.empty()) {
                const std::string x = cfg.axes.front().name;
                std::vector<Series> s;
                for (const char* col : {"q_click", "q_noclick", "q_diff"}) {
                    for (const char* eng : {"analytic", "exact"}) {
                        Series se{std::string(eng) + " " + col, {}};
                        for (const auto& row : t.rows) {
                            if (std::get<std::string>(row[t.column("engine")]) != eng) continue;
                            se.y.push_back(std::get<double>(row[t.column(col)]));
                        }
                        if (!se.y.empty()) s.push_back(std::move(se));
                    }
                }
                Table xt{{x}, {}};
                const std::string first = std::get<std::string>(t.rows.front()[t.column("engine")]);
                for (const auto& row : t.rows) {
                    if (std::get<std::string>(row[t.column("engine")]) == first) xt.rows.push_back({row[t.column(x)]});
                }
                write_plot(cfg, "sweep", x, xt, s);
            }
            return 0;
        }
        case Command::verify: {
            AcceptanceOptions opts;
            opts.optical_cutoff = cfg.fixed.optical_cutoff;
            opts.mirror_cutoff = cfg.fixed.mirror_cutoff;
            const auto results = run_acceptance(opts, [](const CheckResult& r) {
                std::cout << format_check(r) << '\n' << std::flush;
            });
            int failed = 0;
            for (const auto& r : results) failed += r.passed ? 0 : 1;
            std::cout << "summary: " << results.size() - failed << "/" << results.size() << " checks passed\n";
            if (!cfg.csv.empty()) write_table(cfg, acceptance_table(results));
            return failed ? 1 : 0;
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"optoweak: postselected optomechanical weak-value amplification"};
    app.require_subcommand(1);
    Options opts;
    const std::pair<Command, const char*> commands[] = {
        {Command::figure2, "mirror displacement curves versus delta"},
        {Command::figure3, "mean photon number needed for a target postselection probability"},
        {Command::table1, "one-photon weak value table"},
        {Command::verify, "run the acceptance suite"},
        {Command::sweep, "Cartesian parameter sweep"},
    };
    std::vector<std::pair<Command, CLI::App*>> subs;
    for (const auto& [cmd, help] : commands) {
        CLI::App* sub = app.add_subcommand(to_string(cmd), help);
        sub->add_option("--config", opts.config, "JSON config file");
        sub->add_option("--out", opts.out, "CSV output path (default stdout)");
        sub->add_option("--svg", opts.svg, "SVG plot output path");
        sub->add_option("--engine", opts.engine, "analytic|exact|both");
        sub->add_option("--workers", opts.workers, "worker threads");
        subs.emplace_back(cmd, sub);
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("config", e.what(), 2);
    }

    try {
        for (const auto& [cmd, sub] : subs) {
            if (sub->parsed()) return run(cmd, opts);
        }
    } catch (const ConfigError& e) {
        return fail("config", e.what(), 2);
    } catch (const DomainError& e) {
        return fail("config", e.what(), 2);
    } catch (const Error& e) {
        return fail(to_string(e.kind()), e.what(), 3);
    } catch (const std::exception& e) {
        return fail("internal", e.what(), 3);
    }
    return 2;
}
