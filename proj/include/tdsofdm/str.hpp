#pragma once

// Conventional symbol timing recovery: PN correlation (code acquisition), a
// sidelobe-difference timing error detector and a first-order tracking loop
// driving the fractional-delay interpolator.

#include "tdsofdm/frame.hpp"

namespace tdsofdm {

struct CorrelationTrace {
    std::vector<double> r;  // |R(k)| per oversampled lag
    std::size_t peak_index = 0;
};

/// r[k] = |sum_m rx[k + m L] pn[m]|, one lag per oversampled sample.
inline CorrelationTrace correlate_pn(std::span<const cplx> rx, const PnSequence& pn, int n_upsam) {
    const std::size_t l = static_cast<std::size_t>(n_upsam);
    const std::size_t p = pn.size();
    if (p == 0 || rx.size() < l * p) throw std::invalid_argument("buffer too short for PN correlation");
    const std::size_t lags = rx.size() - (p - 1) * l;
    CorrelationTrace t;
    t.r.resize(lags);
    for (std::size_t k = 0; k < lags; ++k) {
        cplx acc{};
        for (std::size_t m = 0; m < p; ++m) acc += rx[k + m * l] * pn.chips[m];
        t.r[k] = std::abs(acc);
    }
    // first maximum wins ties
    t.peak_index = static_cast<std::size_t>(std::max_element(t.r.begin(), t.r.end()) - t.r.begin());
    return t;
}

/// (r[peak+1] - r[peak-1]) / r[peak]. Positive means the true peak lies after
/// the sampled one, i.e. sampling is early by the detector's convention and the
/// loop reduces its delay estimate.
inline double timing_error(const CorrelationTrace& trace) {
    const std::size_t p = trace.peak_index;
    if (p == 0 || p + 1 >= trace.r.size()) throw std::domain_error("correlation peak at trace boundary");
    if (trace.r[p] == 0.0) throw std::domain_error("zero correlation peak");
    return (trace.r[p + 1] - trace.r[p - 1]) / trace.r[p];
}

struct StrLoopState {
    /// Delay applied by the interpolator, in oversampled samples.
    double phase_estimate = 0.0;
    double loop_gain = 0.5;
    std::vector<double> error_history;
    bool converged = false;
    /// Zero-based frame at which convergence was declared, -1 if never.
    int converged_frame = -1;
    /// Refined peak position in input-buffer coordinates after the last frame.
    double peak_position = 0.0;
    std::size_t frames_processed = 0;
    std::size_t boundary_hits = 0;
};

struct StrGeometry {
    /// Expected input-buffer index of the correlation peak in frame 0.
    double first_peak = 0.0;
    /// Frame period in oversampled samples.
    double frame_period = 0.0;
    /// Lags searched on either side of the expected peak.
    std::size_t search_halfwidth = 8;
};

inline constexpr double kStrConvergedError = 0.02;
inline constexpr int kStrConvergedFrames = 5;

/// Run the feedback loop over `n_frames` guard intervals of `rx`.
inline StrLoopState str_track(std::span<const cplx> rx, const PnSequence& pn, int n_upsam, const StrGeometry& geom,
                              StrLoopState state, std::size_t n_frames) {
    if (!(state.loop_gain > 0.0 && state.loop_gain <= 1.0)) throw std::invalid_argument("loop gain must be in (0,1]");
    const std::size_t l = static_cast<std::size_t>(n_upsam);
    const std::size_t span_len = 2 * geom.search_halfwidth + 1 + (pn.size() - 1) * l;
    int quiet = 0;
    for (std::size_t i = 0; i < n_frames; ++i) {
        const double center = std::round(geom.first_peak + static_cast<double>(i) * geom.frame_period);
        const double start = center - static_cast<double>(geom.search_halfwidth);
        if (start < 0.0 || start + static_cast<double>(span_len) > static_cast<double>(rx.size()))
            throw std::invalid_argument("received buffer does not cover the requested frames");
        // z[j] = rx(j - phase_estimate)
        const CVec z = resample_at(rx, start - state.phase_estimate, 1, span_len);
        const auto trace = correlate_pn(z, pn, n_upsam);
        ++state.frames_processed;
        double e = 0.0;
        try {
            e = timing_error(trace);
        } catch (const std::domain_error&) {
            ++state.boundary_hits;
            quiet = 0;
            continue;
        }
        state.error_history.push_back(e);
        state.phase_estimate -= state.loop_gain * e;
        state.peak_position = start + static_cast<double>(trace.peak_index) - state.phase_estimate;
        quiet = std::abs(e) < kStrConvergedError ? quiet + 1 : 0;
        if (!state.converged && quiet >= kStrConvergedFrames) {
            state.converged = true;
            state.converged_frame = static_cast<int>(i);
        }
    }
    return state;
}

}  // namespace tdsofdm
