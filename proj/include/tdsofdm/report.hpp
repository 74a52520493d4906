#pragma once

// CSV tables and the JSON sidecar carrying the resolved configuration.

#include <iomanip>
#include <ostream>

#include <json.hpp>

#include "tdsofdm/harness.hpp"

namespace tdsofdm {

inline nlohmann::ordered_json to_json(const ScenarioConfig& c) {
    nlohmann::ordered_json j;
    j["frame"] = {{"n_fft", c.frame.n_fft},         {"pn_len", c.frame.pn_len},
                  {"dual_pn", c.frame.dual_pn},     {"modulation", to_string(c.frame.modulation)},
                  {"n_upsam", c.frame.n_upsam},     {"alpha", c.frame.alpha},
                  {"pn_power_ratio", c.frame.pn_power_ratio}};
    j["srrc"] = {{"span", c.span_symbols}};
    nlohmann::ordered_json taps = nlohmann::ordered_json::array();
    for (const auto& t : c.profile.taps) taps.push_back({t.delay, t.gain.real(), t.gain.imag()});
    j["channel"] = {{"profile", c.channel}, {"name", c.profile.name}, {"taps", taps}};
    j["phase"] = {{"epsilon", c.phases}};
    j["sweep"] = {{"ebn0_db", c.ebn0_db}, {"reference_ebn0_db", c.reference()}};
    j["mc"] = {{"min_bits", c.mc.min_bits},
               {"min_errors", c.mc.min_errors},
               {"max_frames", c.mc.max_frames},
               {"frames_per_burst", c.mc.frames_per_burst},
               {"batch_bursts", c.mc.batch_bursts}};
    j["run"] = {{"seed", c.seed},
                {"ber_mode", to_string(c.ber_mode)},
                {"equalizer", to_string(c.equalizer)},
                {"tail_recovery", to_string(c.tail_recovery.value_or(c.equalizer == Equalizer::KnownResponse ? TailRecovery::Ideal : TailRecovery::Decision))}};
    j["str"] = {{"loop_gain", c.str_loop_gain}, {"frames", c.str_frames}};
    j["criterion"] = {{"with_str", c.with_str},
                      {"with_oracle", c.with_oracle},
                      {"responses", c.responses == ResponseSource::Analytic ? "analytic" : "pn_estimate"}};
    return j;
}

/// FNV-1a 64 over the canonical JSON dump. Worker count is not part of it.
inline std::string fingerprint(const ScenarioConfig& c) {
    const std::string s = to_json(c).dump();
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    std::ostringstream out;
    out << std::hex << std::setw(16) << std::setfill('0') << h;
    return out.str();
}

inline void write_ber_csv(std::ostream& out, const BerCurve& curve) {
    out << "ebn0_db,epsilon,modulation,ser,ber,bits,errors,source\n";
    out << std::setprecision(10);
    for (const auto& p : curve.points)
        out << p.ebn0_db << ',' << p.epsilon << ',' << to_string(curve.modulation) << ',' << p.ser << ',' << p.ber << ','
            << p.bit_count << ',' << p.error_count << ',' << to_string(p.source) << '\n';
}

inline void write_response_csv(std::ostream& out, std::span<const ResponseRow> rows) {
    out << "f,epsilon,magnitude,phase\n";
    out << std::setprecision(12);
    for (const auto& r : rows) out << r.f << ',' << r.epsilon << ',' << r.magnitude << ',' << r.phase << '\n';
}

inline nlohmann::ordered_json point_json(const BerPoint& p) {
    return {{"ebn0_db", p.ebn0_db},       {"epsilon", p.epsilon},
            {"ser", p.ser},               {"ber", p.ber},
            {"bits", p.bit_count},        {"errors", p.error_count},
            {"decisions", p.decision_count}, {"decision_errors", p.decision_errors},
            {"frames", p.frames},         {"budget_exhausted", p.budget_exhausted}};
}

/// Criterion table: one row per grid phase with objective and (if run) BER.
inline void write_criterion_csv(std::ostream& out, const CriterionReport& rep) {
    out << "epsilon,band_power,ber,bits,errors,chosen,oracle\n";
    out << std::setprecision(12);
    for (std::size_t i = 0; i < rep.criterion.phases.size(); ++i) {
        out << rep.criterion.phases[i] << ',' << rep.criterion.objective[i] << ',';
        if (rep.oracle)
            out << rep.oracle->points[i].ber << ',' << rep.oracle->points[i].bit_count << ','
                << rep.oracle->points[i].error_count;
        else
            out << ",,";
        out << ',' << (i == rep.criterion.chosen_index ? 1 : 0) << ','
            << (rep.oracle && rep.oracle->winner_index == i ? 1 : 0) << '\n';
    }
}

inline nlohmann::ordered_json criterion_json(const CriterionReport& rep) {
    nlohmann::ordered_json j;
    j["chosen"] = rep.criterion.chosen;
    j["band"] = {rep.criterion.band.lo, rep.criterion.band.hi};
    if (rep.criterion_ber) j["chosen_ber"] = point_json(*rep.criterion_ber);
    if (rep.str) {
        j["str"] = {{"epsilon", rep.str->epsilon},
                    {"converged", rep.str->state.converged},
                    {"converged_frame", rep.str->state.converged_frame},
                    {"boundary_hits", rep.str->state.boundary_hits}};
        if (rep.str_ber) j["str"]["ber"] = point_json(*rep.str_ber);
    }
    if (rep.oracle) {
        j["oracle"] = {{"winner", rep.oracle->winner}, {"ber", point_json(rep.oracle->points[rep.oracle->winner_index])}};
    }
    return j;
}

inline nlohmann::ordered_json sidecar(const ScenarioConfig& cfg, std::string_view command, double wall_seconds,
                                      bool flagged) {
    nlohmann::ordered_json j;
    j["command"] = command;
    j["fingerprint"] = fingerprint(cfg);
    j["config"] = to_json(cfg);
    j["wall_seconds"] = wall_seconds;
    j["flagged"] = flagged;
    return j;
}

}  // namespace tdsofdm
