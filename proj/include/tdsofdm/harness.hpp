#pragma once

// Scenario-level drivers: theory and Monte-Carlo BER curves, the sampling-phase
// criterion with its STR and grid-search comparisons, and response dumps.

#include <chrono>

#include "tdsofdm/scenario.hpp"

namespace tdsofdm {

struct BerCurve {
    std::vector<BerPoint> points;
    Modulation modulation = Modulation::QAM16;
    double wall_seconds = 0.0;
    bool flagged = false;
};

namespace detail {

inline void sort_points(std::vector<BerPoint>& pts) {
    std::stable_sort(pts.begin(), pts.end(), [](const BerPoint& a, const BerPoint& b) {
        if (a.ebn0_db != b.ebn0_db) return a.ebn0_db < b.ebn0_db;
        return a.epsilon < b.epsilon;
    });
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

/// Binomial standard deviation of an error-rate estimate.
inline double binomial_sigma(double p, std::uint64_t n) {
    return n ? std::sqrt(std::max(p * (1.0 - p), 0.0) / static_cast<double>(n)) : 0.0;
}

/// Analytic curves on the equivalent response. BPSK uses its own branch; QAM
/// also emits the exponential surrogate as separate rows.
inline BerCurve run_theory(const ScenarioConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    BerCurve curve;
    curve.modulation = cfg.frame.modulation;
    const int m = modulation_order(cfg.frame.modulation);
    for (double eps : cfg.phases) {
        const auto h = equiv_response(cfg.profile, cfg.frame.alpha, eps, cfg.frame.n_fft);
        for (double e : cfg.ebn0_db) {
            BerPoint pt;
            pt.ebn0_db = e;
            pt.epsilon = eps;
            pt.source = BerSource::TheoryEq4;
            if (cfg.frame.modulation == Modulation::BPSK) {
                pt.ber = theoretical_ber_bpsk(h.h, e);
                pt.ser = pt.ber;
            } else {
                pt.ser = theoretical_ser(h, e, m);
                pt.ber = theoretical_ber(pt.ser, m, cfg.ber_mode);
                BerPoint ch = pt;
                ch.source = BerSource::ChernoffEq7;
                ch.ser = std::min(1.0, chernoff_surrogate(h, e, m));
                ch.ber = theoretical_ber(ch.ser, m, cfg.ber_mode);
                curve.points.push_back(ch);
            }
            curve.points.push_back(pt);
        }
    }
    detail::sort_points(curve.points);
    curve.wall_seconds = detail::seconds_since(t0);
    return curve;
}

inline BerCurve run_mc_ber(const ScenarioConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    BerCurve curve;
    curve.modulation = cfg.frame.modulation;
    const auto link = cfg.link();
    for (std::size_t i = 0; i < cfg.ebn0_db.size(); ++i) {
        auto pts = simulate_phases(link, cfg.phases, cfg.ebn0_db[i], cfg.mc, cfg.seed, i);
        for (auto& p : pts) {
            curve.flagged = curve.flagged || p.budget_exhausted;
            curve.points.push_back(p);
        }
    }
    detail::sort_points(curve.points);
    curve.wall_seconds = detail::seconds_since(t0);
    return curve;
}

struct OracleResult {
    double winner = 0.0;
    std::size_t winner_index = 0;
    std::vector<BerPoint> points;
};

/// Measured BER per grid phase at one Eb/N0; winner is the minimum.
inline OracleResult grid_search_ber_oracle(const LinkSetup& link, const PhaseGrid& grid, std::optional<double> ebn0_db,
                                           const McBudget& budget, std::uint64_t seed) {
    OracleResult r;
    r.points = simulate_phases(link, grid.phases(), ebn0_db, budget, seed);
    std::vector<double> ber;
    for (const auto& p : r.points) ber.push_back(p.ber);
    r.winner_index = detail::pick_phase(ber, grid.phases(), false);
    r.winner = grid[r.winner_index];
    return r;
}

/// Responses per phase from either the analytic model or noiseless PN estimates.
inline std::vector<EquivResponse> phase_responses(const ScenarioConfig& cfg) {
    std::vector<EquivResponse> out;
    if (cfg.responses == ResponseSource::Analytic) {
        for (double eps : cfg.phases) out.push_back(equiv_response(cfg.profile, cfg.frame.alpha, eps, cfg.frame.n_fft));
        return out;
    }
    auto link = LinkSetup::make(cfg.frame, cfg.span_symbols, cfg.profile, Equalizer::PnEstimate);
    const std::size_t frames = std::max<std::size_t>(cfg.mc.frames_per_burst, 1);
    const auto sig = synthesize_burst(link, frames, cfg.reference(), derive_seed(cfg.seed, 0, 0, 7));
    for (double eps : cfg.phases) {
        const CVec z = sample_at_phase(sig, link, eps);
        const auto w = guard_windows(z, link, frames);
        auto est = estimate_response_from_pn(w, link.pn, cfg.frame.n_fft, frames + 1, link.pn_lead,
                                             cfg.frame.guard_amplitude());
        est.epsilon = eps;
        est.alpha = cfg.frame.alpha;
        out.push_back(std::move(est));
    }
    return out;
}

struct CriterionReport {
    CriterionResult criterion;
    std::optional<StrOutcome> str;
    /// BER of the criterion phase, the STR phase and every grid phase, from one
    /// Monte-Carlo run sharing noise realizations.
    std::optional<BerPoint> criterion_ber;
    std::optional<BerPoint> str_ber;
    std::optional<OracleResult> oracle;
    double wall_seconds = 0.0;
    bool flagged = false;
};

inline CriterionReport run_criterion(const ScenarioConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    CriterionReport rep;
    const auto responses = phase_responses(cfg);
    rep.criterion = criterion_general(responses, cfg.frame.alpha, cfg.frame.n_fft);

    const auto link = cfg.link();
    if (cfg.with_str) {
        rep.str = run_str(link, cfg.str_frames, cfg.reference(), derive_seed(cfg.seed, 0, 0, 9), cfg.str_loop_gain);
        rep.flagged = rep.flagged || !rep.str->state.converged;
    }

    if (cfg.with_oracle || cfg.with_str) {
        std::vector<double> phases = cfg.with_oracle ? cfg.phases : std::vector<double>{rep.criterion.chosen};
        const std::size_t chosen_at = cfg.with_oracle ? rep.criterion.chosen_index : 0;
        std::optional<std::size_t> str_at;
        if (rep.str) {
            str_at = phases.size();
            phases.push_back(rep.str->epsilon);
        }
        const auto pts = simulate_phases(link, phases, cfg.reference(), cfg.mc, cfg.seed);
        for (const auto& p : pts) rep.flagged = rep.flagged || p.budget_exhausted;
        rep.criterion_ber = pts[chosen_at];
        if (str_at) rep.str_ber = pts[*str_at];
        if (cfg.with_oracle) {
            OracleResult o;
            o.points.assign(pts.begin(), pts.begin() + static_cast<std::ptrdiff_t>(cfg.phases.size()));
            std::vector<double> ber;
            for (const auto& p : o.points) ber.push_back(p.ber);
            o.winner_index = detail::pick_phase(ber, cfg.phases, false);
            o.winner = cfg.phases[o.winner_index];
            rep.oracle = std::move(o);
        }
    }
    rep.wall_seconds = detail::seconds_since(t0);
    return rep;
}

struct ResponseRow {
    double f = 0.0;
    double epsilon = 0.0;
    double magnitude = 0.0;
    double phase = 0.0;
};

inline std::vector<ResponseRow> dump_response(const ScenarioConfig& cfg, std::span<const double> phases) {
    std::vector<ResponseRow> rows;
    const std::size_t n = cfg.frame.n_fft;
    for (double eps : phases) {
        const auto h = equiv_response(cfg.profile, cfg.frame.alpha, eps, n);
        for (std::size_t i = 0; i < n; ++i)
            rows.push_back({static_cast<double>(i) / static_cast<double>(n), eps, std::abs(h.h[i]), std::arg(h.h[i])});
    }
    return rows;
}

}  // namespace tdsofdm
