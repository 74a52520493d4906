// tdsofdm: command-line front end for the sampling-phase simulator.
//
// Exit codes: 0 success, 2 configuration error, 3 a result carries a
// non-convergence or budget-exhausted flag.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "tdsofdm/tdsofdm.hpp"

namespace {

using namespace tdsofdm;

struct Overrides {
    std::string config;
    std::string ebn0;
    std::string epsilon;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> workers;
    std::string out;
};

ScenarioConfig resolve(const Overrides& o) {
    ScenarioConfig cfg;
    if (!o.config.empty()) cfg = load_scenario(o.config);
    if (!o.ebn0.empty()) {
        cfg.ebn0_db = detail::parse_sweep("--ebn0", o.ebn0);
        cfg.reference_ebn0_db.reset();
    }
    if (!o.epsilon.empty()) cfg.phases = detail::parse_list("--epsilon", o.epsilon);
    if (o.seed) cfg.seed = *o.seed;
    if (o.workers) cfg.mc.workers = *o.workers;
    cfg.validate();
    return cfg;
}

/// Write `body` to --out (plus a .json sidecar) or to stdout.
template <typename Body>
void emit(const Overrides& o, const nlohmann::ordered_json& meta, Body&& body) {
    if (o.out.empty()) {
        body(std::cout);
        return;
    }
    std::ofstream csv(o.out);
    if (!csv) throw ConfigError("cannot write '" + o.out + "'");
    body(csv);
    std::ofstream js(o.out + ".json");
    js << meta.dump(2) << '\n';
}

void add_common(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--config", o.config, "scenario file")->check(CLI::ExistingFile);
    cmd->add_option("--ebn0", o.ebn0, "Eb/N0 in dB: list a,b,c or range start:step:stop");
    cmd->add_option("--epsilon", o.epsilon, "sampling phases, comma separated");
    cmd->add_option("--seed", o.seed, "master seed");
    cmd->add_option("--workers", o.workers, "worker threads (results do not depend on it)");
    cmd->add_option("--out", o.out, "CSV output path; a .json sidecar is written next to it");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"TDS-OFDM sampling-phase simulator"};
    app.require_subcommand(1);
    Overrides o;
    auto* theory = app.add_subcommand("theory", "analytic SER/BER curves");
    auto* simulate = app.add_subcommand("simulate", "Monte-Carlo BER curves");
    auto* criterion = app.add_subcommand("criterion", "roll-off-band phase criterion with STR and grid-search comparison");
    auto* response = app.add_subcommand("response", "equivalent response magnitude per phase");
    auto* str = app.add_subcommand("str-baseline", "PN-correlation timing recovery on one burst");
    for (auto* c : {theory, simulate, criterion, response, str}) add_common(c, o);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        const ScenarioConfig cfg = resolve(o);
        bool flagged = false;
        if (theory->parsed()) {
            const auto curve = run_theory(cfg);
            emit(o, sidecar(cfg, "theory", curve.wall_seconds, false), [&](std::ostream& s) { write_ber_csv(s, curve); });
        } else if (simulate->parsed()) {
            const auto curve = run_mc_ber(cfg);
            flagged = curve.flagged;
            emit(o, sidecar(cfg, "simulate", curve.wall_seconds, flagged), [&](std::ostream& s) { write_ber_csv(s, curve); });
        } else if (criterion->parsed()) {
            const auto rep = run_criterion(cfg);
            flagged = rep.flagged;
            auto meta = sidecar(cfg, "criterion", rep.wall_seconds, flagged);
            meta["result"] = criterion_json(rep);
            emit(o, meta, [&](std::ostream& s) { write_criterion_csv(s, rep); });
            std::cerr << meta["result"].dump(2) << '\n';
        } else if (response->parsed()) {
            const auto rows = dump_response(cfg, cfg.phases);
            emit(o, sidecar(cfg, "response", 0.0, false), [&](std::ostream& s) { write_response_csv(s, rows); });
        } else if (str->parsed()) {
            const auto t0 = std::chrono::steady_clock::now();
            const auto r = run_str(cfg.link(), cfg.str_frames, cfg.reference(), derive_seed(cfg.seed, 0, 0, 9), cfg.str_loop_gain);
            flagged = !r.state.converged;
            auto meta = sidecar(cfg, "str-baseline", detail::seconds_since(t0), flagged);
            meta["result"] = {{"epsilon", r.epsilon},
                              {"converged", r.state.converged},
                              {"converged_frame", r.state.converged_frame},
                              {"boundary_hits", r.state.boundary_hits}};
            emit(o, meta, [&](std::ostream& s) {
                s << "frame,timing_error\n";
                for (std::size_t i = 0; i < r.state.error_history.size(); ++i) s << i << ',' << r.state.error_history[i] << '\n';
            });
            std::cerr << meta["result"].dump(2) << '\n';
        }
        return flagged ? 3 : 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
