#pragma once

// Theoretical SER/BER on the equivalent response, the exponential surrogate,
// and the roll-off-band sampling-phase criteria.

#include <optional>

#include "tdsofdm/channel.hpp"

namespace tdsofdm {

class PhaseGrid {
public:
    PhaseGrid() = default;
    explicit PhaseGrid(std::vector<double> phases) : phases_(std::move(phases)) {
        std::sort(phases_.begin(), phases_.end());
        if (std::adjacent_find(phases_.begin(), phases_.end()) != phases_.end())
            throw std::invalid_argument("phase grid contains duplicates");
        for (double p : phases_)
            if (!std::isfinite(p)) throw std::invalid_argument("phase grid values must be finite");
    }

    /// `size` points -0.5 + i/size; contains 0 for even sizes.
    static PhaseGrid uniform(std::size_t size) {
        if (size == 0) throw std::invalid_argument("phase grid size must be positive");
        std::vector<double> p(size);
        for (std::size_t i = 0; i < size; ++i) p[i] = -0.5 + static_cast<double>(i) / static_cast<double>(size);
        return PhaseGrid(std::move(p));
    }

    const std::vector<double>& phases() const { return phases_; }
    std::size_t size() const { return phases_.size(); }
    bool empty() const { return phases_.empty(); }
    double operator[](std::size_t i) const { return phases_[i]; }

private:
    std::vector<double> phases_;
};

struct Band {
    std::size_t lo = 0;
    std::size_t hi = 0;
    std::size_t count() const { return hi - lo + 1; }
};

/// Roll-off band bins ceil(0.5 N (1-alpha)) .. floor(0.5 N (1+alpha)).
inline Band rolloff_band(std::size_t n, double alpha) {
    const double lo = std::ceil(0.5 * static_cast<double>(n) * (1.0 - alpha) - 1e-9);
    const double hi = std::floor(0.5 * static_cast<double>(n) * (1.0 + alpha) + 1e-9);
    if (hi < lo) throw std::invalid_argument("roll-off band is empty for this N and alpha");
    return Band{static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

struct CriterionResult {
    double chosen = 0.0;
    std::size_t chosen_index = 0;
    std::vector<double> phases;
    /// Maximized objective per phase.
    std::vector<double> objective;
    /// Exponential (surrogate) form per phase, minimized; empty when not evaluated.
    std::vector<double> exp_objective;
    Band band;
};

enum class BerSource { TheoryEq4, ChernoffEq7, MonteCarlo };

inline std::string to_string(BerSource s) {
    switch (s) {
        case BerSource::TheoryEq4: return "theory";
        case BerSource::ChernoffEq7: return "chernoff";
        case BerSource::MonteCarlo: return "mc";
    }
    return "?";
}

struct BerPoint {
    double ebn0_db = 0.0;
    double epsilon = 0.0;
    double ser = 0.0;
    double ber = 0.0;
    BerSource source = BerSource::TheoryEq4;
    std::uint64_t bit_count = 0;
    std::uint64_t error_count = 0;
    /// Per-axis decisions (one per BPSK symbol, two per QAM symbol) and their errors.
    std::uint64_t decision_count = 0;
    std::uint64_t decision_errors = 0;
    std::uint64_t frames = 0;
    /// Set when max_frames ran out before the error/bit targets were met.
    bool budget_exhausted = false;
};

enum class BerMode { PaperEq5, StandardGray };

inline std::string to_string(BerMode m) { return m == BerMode::PaperEq5 ? "paper" : "gray"; }

inline BerMode parse_ber_mode(std::string_view s) {
    if (s == "paper") return BerMode::PaperEq5;
    if (s == "gray") return BerMode::StandardGray;
    throw std::invalid_argument("ber_mode must be 'paper' or 'gray'");
}

namespace detail {

inline int square_qam_levels(int m) {
    const int k = static_cast<int>(std::lround(std::sqrt(static_cast<double>(m))));
    if (m < 4 || k * k != m || !is_power_of_two(static_cast<std::size_t>(k)))
        throw std::invalid_argument("M must be a square QAM order (4, 16, 64, 256, ...)");
    return k;
}

struct QamFactors {
    double lambda;  // 2 (kappa - 1) / kappa
    double gain;    // 6 log2(kappa) / (kappa^2 - 1)
    double log2k;
};

inline QamFactors qam_factors(int m) {
    const double k = square_qam_levels(m);
    return {2.0 * (k - 1.0) / k, 6.0 * std::log2(k) / (k * k - 1.0), std::log2(k)};
}

/// argmax (or argmin) with ties resolved toward the smallest |phase|, then the
/// smaller phase. Values within `rel_tol` of the best count as ties.
inline std::size_t pick_phase(std::span<const double> values, std::span<const double> phases, bool maximize,
                              double rel_tol = 1e-12) {
    if (values.empty()) throw std::invalid_argument("nothing to choose from");
    double best = values[0];
    for (double v : values) best = maximize ? std::max(best, v) : std::min(best, v);
    const double tol = rel_tol * std::max(1.0, std::abs(best));
    std::optional<std::size_t> chosen;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (std::abs(values[i] - best) > tol) continue;
        if (!chosen) {
            chosen = i;
            continue;
        }
        const double a = std::abs(phases[i]), b = std::abs(phases[*chosen]);
        if (a < b || (a == b && phases[i] < phases[*chosen])) chosen = i;
    }
    return *chosen;
}

}  // namespace detail

/// Average over bins of lambda * Q(sqrt(|H|^2 * gain * Eb/N0)) for square M-QAM.
inline double theoretical_ser(std::span<const cplx> h, double ebn0_db, int m) {
    const auto f = detail::qam_factors(m);
    const double x = f.gain * db_to_linear(ebn0_db);
    double acc = 0.0;
    for (const auto& v : h) acc += f.lambda * qfunc(std::sqrt(std::norm(v) * x));
    return acc / static_cast<double>(h.size());
}

inline double theoretical_ser(const EquivResponse& h, double ebn0_db, int m) { return theoretical_ser(h.h, ebn0_db, m); }

inline double theoretical_ber(double ser, int m, BerMode mode) {
    if (!(ser >= 0.0 && ser <= 1.0)) throw std::invalid_argument("SER must lie in [0,1]");
    const double k = detail::square_qam_levels(m);
    return mode == BerMode::PaperEq5 ? ser / std::log2(k) : ser / std::log2(static_cast<double>(m));
}

/// BPSK on every bin: mean of Q(sqrt(2 |H|^2 Eb/N0)).
inline double theoretical_ber_bpsk(std::span<const cplx> h, double ebn0_db) {
    const double x = 2.0 * db_to_linear(ebn0_db);
    double acc = 0.0;
    for (const auto& v : h) acc += qfunc(std::sqrt(std::norm(v) * x));
    return acc / static_cast<double>(h.size());
}

/// (1/N) sum lambda * exp(-|H|^2 eta). A ranking surrogate, not a bound.
inline double chernoff_surrogate(std::span<const cplx> h, double ebn0_db, int m) {
    const auto f = detail::qam_factors(m);
    const double eta = f.gain * db_to_linear(ebn0_db);
    double acc = 0.0;
    for (const auto& v : h) acc += f.lambda * std::exp(-std::norm(v) * eta);
    return acc / static_cast<double>(h.size());
}

inline double chernoff_surrogate(const EquivResponse& h, double ebn0_db, int m) {
    return chernoff_surrogate(h.h, ebn0_db, m);
}

/// Roll-off band power of |H(f; eps)|^2 over AWGN in trigonometric form.
inline double awgn_band_objective(double alpha, std::size_t n, Band band, double eps) {
    const double c2 = std::cos(kPi * eps) * std::cos(kPi * eps);
    const double s2 = std::sin(kPi * eps) * std::sin(kPi * eps);
    double acc = 0.0;
    for (std::size_t i = band.lo; i <= band.hi; ++i) {
        const double s = std::sin(kPi / alpha * (0.5 - static_cast<double>(i) / static_cast<double>(n)));
        acc += c2 + s2 * s * s;
    }
    return acc;
}

inline CriterionResult criterion_awgn(double alpha, std::size_t n, const PhaseGrid& grid, double ebn0_db, int m) {
    if (grid.empty()) throw std::invalid_argument("phase grid is empty");
    const auto band = rolloff_band(n, alpha);
    const double eta = detail::qam_factors(m).gain * db_to_linear(ebn0_db);
    CriterionResult r;
    r.band = band;
    r.phases = grid.phases();
    for (double eps : grid.phases()) {
        r.objective.push_back(awgn_band_objective(alpha, n, band, eps));
        const double c2 = std::cos(kPi * eps) * std::cos(kPi * eps);
        const double s2 = std::sin(kPi * eps) * std::sin(kPi * eps);
        double e = 0.0;
        for (std::size_t i = band.lo; i <= band.hi; ++i) {
            const double s = std::sin(kPi / alpha * (0.5 - static_cast<double>(i) / static_cast<double>(n)));
            e += std::exp(-(c2 + s2 * s * s) * eta);
        }
        r.exp_objective.push_back(e);
    }
    r.chosen_index = detail::pick_phase(r.objective, r.phases, true);
    r.chosen = r.phases[r.chosen_index];
    return r;
}

inline double band_power(std::span<const cplx> h, Band band) {
    double acc = 0.0;
    for (std::size_t i = band.lo; i <= band.hi; ++i) acc += std::norm(h[i]);
    return acc;
}

/// Choose the phase whose response carries the most roll-off-band power.
inline CriterionResult criterion_general(std::span<const EquivResponse> responses, double alpha, std::size_t n) {
    if (responses.empty()) throw std::invalid_argument("no responses supplied");
    const auto band = rolloff_band(n, alpha);
    CriterionResult r;
    r.band = band;
    for (const auto& resp : responses) {
        if (resp.size() != n) throw std::invalid_argument("response length does not match N");
        r.phases.push_back(resp.epsilon);
        r.objective.push_back(band_power(resp.h, band));
    }
    r.chosen_index = detail::pick_phase(r.objective, r.phases, true);
    r.chosen = r.phases[r.chosen_index];
    return r;
}

}  // namespace tdsofdm
