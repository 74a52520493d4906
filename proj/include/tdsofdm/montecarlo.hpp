#pragma once

// Monte-Carlo link engine. A burst of frames is synthesized once (bits, frames,
// shaping, channel, noise, matched filter) and then received at any number of
// sampling phases, so every phase in a run sees the same noise realization.
//
// Receiver per frame: cancel the known PN guards, fold the body tails into the
// N-sample window, zero-force, slice; then rebuild the tails from the first
// decisions instead of the received tails (which would add noise) and decide
// again.

#include <atomic>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <thread>

#include "tdsofdm/analysis.hpp"
#include "tdsofdm/str.hpp"

namespace tdsofdm {

enum class Equalizer { KnownResponse, PnEstimate };

inline std::string to_string(Equalizer e) { return e == Equalizer::KnownResponse ? "known" : "pn_estimate"; }

inline Equalizer parse_equalizer(std::string_view s) {
    if (s == "known") return Equalizer::KnownResponse;
    if (s == "pn_estimate") return Equalizer::PnEstimate;
    throw std::invalid_argument("equalizer must be 'known' or 'pn_estimate'");
}

/// How the receiver restores the cyclic structure of a body before the DFT.
/// Ideal rebuilds the body tails from the sent symbols; Decision rebuilds them
/// from soft first-pass decisions.
enum class TailRecovery { Ideal, Decision };

inline std::string to_string(TailRecovery t) { return t == TailRecovery::Ideal ? "ideal" : "decision"; }

inline TailRecovery parse_tail_recovery(std::string_view s) {
    if (s == "ideal") return TailRecovery::Ideal;
    if (s == "decision") return TailRecovery::Decision;
    throw std::invalid_argument("tail_recovery must be 'ideal' or 'decision'");
}

struct McBudget {
    std::uint64_t min_bits = 2'000'000;
    std::uint64_t min_errors = 100;
    std::uint64_t max_frames = 200'000;
    std::size_t frames_per_burst = 8;
    /// Bursts simulated between stopping checks; fixed so results do not depend on `workers`.
    std::size_t batch_bursts = 8;
    unsigned workers = 1;
};

struct LinkSetup {
    FrameConfig frame;
    SrrcSpec srrc;
    ChannelProfile profile = ChannelProfile::awgn();
    PnSequence pn;
    Equalizer equalizer = Equalizer::KnownResponse;
    TailRecovery tail = TailRecovery::Ideal;
    /// Samples before the second PN where estimation windows start.
    std::size_t pn_lead = 0;

    static LinkSetup make(const FrameConfig& frame, int span_symbols, ChannelProfile profile,
                          Equalizer eq = Equalizer::KnownResponse, std::optional<TailRecovery> tail = std::nullopt) {
        frame.validate();
        LinkSetup s;
        s.frame = frame;
        s.srrc = SrrcSpec{frame.alpha, span_symbols, frame.n_upsam};
        s.srrc.validate();
        s.profile = std::move(profile);
        s.pn = make_default_pn(frame.pn_len);
        s.equalizer = eq;
        s.tail = tail.value_or(eq == Equalizer::KnownResponse ? TailRecovery::Ideal : TailRecovery::Decision);
        s.pn_lead = frame.pn_len / 4;
        if (eq == Equalizer::PnEstimate && !frame.dual_pn)
            throw std::invalid_argument("PN-based estimation needs dual-PN guards");
        return s;
    }
};

/// splitmix64 finalizer.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t burst, std::uint64_t ebn0_index,
                                 std::uint64_t stream = 0) {
    std::uint64_t h = mix64(master);
    h = mix64(h ^ burst);
    h = mix64(h ^ (ebn0_index << 20));
    return mix64(h ^ (stream << 40));
}

struct BurstSignal {
    CVec rx;  // matched-filter output, oversampled
    std::vector<std::vector<unsigned>> labels;
    std::vector<CVec> data;  // frequency-domain symbols per frame
    CVec guard_stream;       // symbol-rate known guard samples, zero over bodies
    std::size_t symbol_count = 0;
    double delay = 0.0;  // oversampled index of symbol 0 at eps = 0
    double noise_var = 0.0;  // complex noise variance per symbol-rate sample after the matched filter
};

/// Transmit `frames` random frames plus a trailing guard through the link.
/// `ebn0_db` empty means noiseless.
inline BurstSignal synthesize_burst(const LinkSetup& link, std::size_t frames, std::optional<double> ebn0_db,
                                    std::uint64_t seed) {
    const auto& cfg = link.frame;
    const auto& con = constellation(cfg.modulation);
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<unsigned> label_dist(0, static_cast<unsigned>(con.order() - 1));

    BurstSignal b;
    const CVec guard = make_guard(link.pn, cfg);
    CVec stream;
    stream.reserve(frames * cfg.frame_len() + cfg.guard_len());
    for (std::size_t i = 0; i < frames; ++i) {
        std::vector<unsigned> labels(cfg.n_fft);
        CVec syms(cfg.n_fft);
        for (std::size_t k = 0; k < cfg.n_fft; ++k) {
            labels[k] = label_dist(rng);
            syms[k] = con.point(labels[k]);
        }
        const TdsFrame f = build_frame(syms, link.pn, cfg);
        stream.insert(stream.end(), f.guard.begin(), f.guard.end());
        b.guard_stream.insert(b.guard_stream.end(), f.guard.begin(), f.guard.end());
        stream.insert(stream.end(), f.body.begin(), f.body.end());
        b.guard_stream.insert(b.guard_stream.end(), cfg.n_fft, cplx{});
        b.labels.push_back(std::move(labels));
        b.data.push_back(std::move(syms));
    }
    stream.insert(stream.end(), guard.begin(), guard.end());
    b.guard_stream.insert(b.guard_stream.end(), guard.begin(), guard.end());
    b.symbol_count = stream.size();

    SignalBuffer tx = shape_symbols(stream, cfg, link.srrc);
    SignalBuffer ch = apply_channel(tx, link.profile);
    if (ebn0_db) {
        const double p_os = cfg.body_power() / cfg.n_upsam;
        ch = add_awgn(ch, *ebn0_db, bits_per_symbol(cfg.modulation), cfg.n_upsam, p_os, rng);
        // unit-energy matched filter keeps the per-sample variance
        b.noise_var = awgn_variance(*ebn0_db, bits_per_symbol(cfg.modulation), cfg.n_upsam, p_os);
    }
    const auto taps = design_srrc_taps(link.srrc);
    b.rx = convolve<double>(ch.samples, taps);
    b.delay = 2.0 * static_cast<double>(link.srrc.group_delay());
    return b;
}

/// Symbol-rate samples taken at t = m T + eps T.
inline CVec sample_at_phase(const BurstSignal& b, const LinkSetup& link, double eps) {
    const double l = link.frame.n_upsam;
    return resample_at(b.rx, b.delay + eps * l, static_cast<std::size_t>(link.frame.n_upsam), b.symbol_count);
}

/// Equivalent impulse response g[t], t in [-reach, reach], from N-bin response.
struct ImpulseResponse {
    std::vector<cplx> taps;
    long reach = 0;
    cplx at(long t) const { return taps[static_cast<std::size_t>(t + reach)]; }
};

inline ImpulseResponse truncate_impulse(std::span<const cplx> h, long max_reach, double energy_tol = 1e-10) {
    const CVec g = idft(h);
    const long n = static_cast<long>(g.size());
    auto at = [&](long t) { return g[static_cast<std::size_t>(((t % n) + n) % n)]; };
    double total = 0.0;
    for (const auto& v : g) total += std::norm(v);
    max_reach = std::min(max_reach, n / 2 - 1);
    long reach = 0;
    double inside = std::norm(at(0));
    while (reach < max_reach && inside < (1.0 - energy_tol) * total) {
        ++reach;
        inside += std::norm(at(reach)) + std::norm(at(-reach));
    }
    ImpulseResponse ir;
    ir.reach = reach;
    for (long t = -reach; t <= reach; ++t) ir.taps.push_back(at(t));
    return ir;
}

struct PhaseCounts {
    std::uint64_t bits = 0;
    std::uint64_t bit_errors = 0;
    std::uint64_t decisions = 0;
    std::uint64_t decision_errors = 0;
    std::uint64_t frames = 0;

    PhaseCounts& operator+=(const PhaseCounts& o) {
        bits += o.bits;
        bit_errors += o.bit_errors;
        decisions += o.decisions;
        decision_errors += o.decision_errors;
        frames += o.frames;
        return *this;
    }
};

/// Response used for equalization and guard cancellation at one phase.
struct ReceiverModel {
    CVec h;
    ImpulseResponse g;
};

inline ReceiverModel known_receiver_model(const LinkSetup& link, double eps) {
    const auto& cfg = link.frame;
    ReceiverModel m;
    m.h = equiv_response(link.profile, cfg.alpha, eps, cfg.n_fft).h;
    m.g = truncate_impulse(m.h, static_cast<long>((cfg.guard_len() - 1) / 2));
    return m;
}

/// Received guard windows for PN estimation: one per dual guard in the burst.
inline CVec guard_windows(std::span<const cplx> z, const LinkSetup& link, std::size_t frames) {
    const auto& cfg = link.frame;
    CVec w;
    for (std::size_t i = 0; i <= frames; ++i) {
        const std::size_t start = i * cfg.frame_len() + cfg.pn_len - link.pn_lead;
        w.insert(w.end(), z.begin() + static_cast<std::ptrdiff_t>(start),
                 z.begin() + static_cast<std::ptrdiff_t>(start + cfg.pn_len));
    }
    return w;
}

inline ReceiverModel estimated_receiver_model(std::span<const cplx> z, const LinkSetup& link, std::size_t frames) {
    const auto& cfg = link.frame;
    const CVec w = guard_windows(z, link, frames);
    const auto est = estimate_response_from_pn(w, link.pn, cfg.n_fft, frames + 1, link.pn_lead, cfg.guard_amplitude());
    ReceiverModel m;
    // keep only taps inside the window the estimator can resolve
    const long reach = static_cast<long>(link.pn_lead);
    const CVec g = idft(est.h);
    const long n = static_cast<long>(g.size());
    CVec trimmed(g.size());
    m.g.reach = reach;
    for (long t = -reach; t <= reach; ++t) {
        const auto idx = static_cast<std::size_t>(((t % n) + n) % n);
        trimmed[idx] = g[idx];
        m.g.taps.push_back(g[idx]);
    }
    m.h = dft(trimmed);
    return m;
}

/// Per-frame frequency-domain observations, for response probing.
struct FrameObservation {
    CVec y;  // folded, guard-cancelled window spectrum
    std::size_t frame = 0;
};

namespace detail {

inline CVec zero_force(std::span<const cplx> y, std::span<const cplx> h) {
    CVec x(y.size());
    for (std::size_t k = 0; k < y.size(); ++k) x[k] = std::norm(h[k]) > 1e-300 ? y[k] / h[k] : cplx{};
    return x;
}

}  // namespace detail

/// Receive every frame of a burst from symbol-rate samples `z`.
/// With `observations` set, also returns pass-one window spectra.
inline PhaseCounts receive_burst(std::span<const cplx> z, const BurstSignal& b, const LinkSetup& link,
                                 const ReceiverModel& model, std::vector<FrameObservation>* observations = nullptr) {
    const auto& cfg = link.frame;
    const auto& con = constellation(cfg.modulation);
    const std::size_t n = cfg.n_fft;
    const long k_reach = model.g.reach;
    const long total = static_cast<long>(z.size());
    auto z_at = [&](long m) { return (m >= 0 && m < total) ? z[static_cast<std::size_t>(m)] : cplx{}; };
    auto guard_at = [&](long m) {
        return (m >= 0 && m < static_cast<long>(b.guard_stream.size())) ? b.guard_stream[static_cast<std::size_t>(m)] : cplx{};
    };
    // z minus the known guard contribution
    auto cleaned = [&](long m) {
        cplx v = z_at(m);
        for (long t = -k_reach; t <= k_reach; ++t) {
            const cplx c = guard_at(m - t);
            if (c != cplx{}) v -= model.g.at(t) * c;
        }
        return v;
    };

    PhaseCounts counts;
    const std::size_t frames = b.labels.size();
    CVec y(n), y2(n), xhat_t;
    for (std::size_t i = 0; i < frames; ++i) {
        const long body = static_cast<long>(i * cfg.frame_len() + cfg.guard_len());
        for (std::size_t k = 0; k < n; ++k) {
            const long m = body + static_cast<long>(k);
            const bool edge = static_cast<long>(k) < k_reach || static_cast<long>(k) >= static_cast<long>(n) - k_reach;
            y[k] = edge ? cleaned(m) : z_at(m);
        }
        const CVec unfolded = y;
        for (long j = 0; j < k_reach; ++j) {
            y[static_cast<std::size_t>(j)] += cleaned(body + static_cast<long>(n) + j);
            y[n - static_cast<std::size_t>(k_reach) + static_cast<std::size_t>(j)] += cleaned(body - k_reach + j);
        }
        const CVec Y = dft(y);
        if (observations) observations->push_back({Y, i});
        CVec X = detail::zero_force(Y, model.h);

        // rebuild the tails; soft decisions let unreliable bins fall back toward zero
        CVec decided(n);
        for (std::size_t k = 0; k < n; ++k) {
            if (link.tail == TailRecovery::Ideal) {
                decided[k] = b.data[i][k];
                continue;
            }
            const double gain = std::norm(model.h[k]);
            const double var = gain > 1e-300 ? static_cast<double>(n) * b.noise_var / gain
                                             : (b.noise_var > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
            decided[k] = con.soft_point(X[k], var);
        }
        xhat_t = idft(decided);
        auto xhat = [&](long m) { return (m >= 0 && m < static_cast<long>(n)) ? xhat_t[static_cast<std::size_t>(m)] : cplx{}; };
        y2 = unfolded;
        for (long j = 0; j < k_reach; ++j) {
            cplx right{}, left{};
            for (long t = -k_reach; t <= k_reach; ++t) {
                right += model.g.at(t) * xhat(static_cast<long>(n) + j - t);
                left += model.g.at(t) * xhat(-k_reach + j - t);
            }
            y2[static_cast<std::size_t>(j)] += right;
            y2[n - static_cast<std::size_t>(k_reach) + static_cast<std::size_t>(j)] += left;
        }
        X = detail::zero_force(dft(y2), model.h);

        const auto& tx = b.labels[i];
        for (std::size_t k = 0; k < n; ++k) {
            const unsigned rx = con.slice(X[k]);
            counts.bit_errors += static_cast<std::uint64_t>(std::popcount(rx ^ tx[k]));
            counts.decision_errors += static_cast<std::uint64_t>(con.axis_errors(tx[k], rx));
        }
        counts.bits += n * static_cast<std::size_t>(con.bits());
        counts.decisions += n * static_cast<std::size_t>(con.dimensions());
        ++counts.frames;
    }
    return counts;
}

inline ReceiverModel receiver_model(std::span<const cplx> z, const LinkSetup& link, double eps, std::size_t frames) {
    return link.equalizer == Equalizer::KnownResponse ? known_receiver_model(link, eps)
                                                      : estimated_receiver_model(z, link, frames);
}

/// Minimum guard length for the receiver's cancellation window.
inline void check_geometry(const LinkSetup& link) {
    if (link.frame.guard_len() < 16) throw std::invalid_argument("guard too short");
    if (link.pn_lead >= link.frame.pn_len) throw std::invalid_argument("pn_lead must be shorter than pn_len");
}

/// Error counts per phase at one Eb/N0, all phases sharing each burst.
inline std::vector<BerPoint> simulate_phases(const LinkSetup& link, std::span<const double> phases,
                                             std::optional<double> ebn0_db, const McBudget& budget,
                                             std::uint64_t master_seed, std::uint64_t ebn0_index = 0) {
    check_geometry(link);
    if (phases.empty()) throw std::invalid_argument("no sampling phases to simulate");
    if (budget.frames_per_burst == 0 || budget.batch_bursts == 0) throw std::invalid_argument("empty burst batch");
    std::vector<PhaseCounts> totals(phases.size());
    std::vector<ReceiverModel> known;
    if (link.equalizer == Equalizer::KnownResponse)
        for (double eps : phases) known.push_back(known_receiver_model(link, eps));

    auto run_burst = [&](std::uint64_t burst) {
        std::vector<PhaseCounts> c(phases.size());
        const auto sig = synthesize_burst(link, budget.frames_per_burst, ebn0_db, derive_seed(master_seed, burst, ebn0_index));
        for (std::size_t p = 0; p < phases.size(); ++p) {
            const CVec z = sample_at_phase(sig, link, phases[p]);
            if (link.equalizer == Equalizer::KnownResponse)
                c[p] = receive_burst(z, sig, link, known[p]);
            else
                c[p] = receive_burst(z, sig, link, estimated_receiver_model(z, link, budget.frames_per_burst));
        }
        return c;
    };

    auto done = [&] {
        if (totals.front().frames >= budget.max_frames) return true;
        for (const auto& t : totals)
            if (t.bits < budget.min_bits || t.decision_errors < budget.min_errors) return false;
        return true;
    };

    const unsigned workers = std::max(1u, budget.workers);
    std::uint64_t next_burst = 0;
    while (!done()) {
        std::vector<std::vector<PhaseCounts>> batch(budget.batch_bursts);
        std::atomic<std::size_t> cursor{0};
        auto worker = [&] {
            for (std::size_t j = cursor++; j < batch.size(); j = cursor++) batch[j] = run_burst(next_burst + j);
        };
        if (workers == 1) {
            worker();
        } else {
            std::vector<std::jthread> pool;
            for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
        }
        for (const auto& c : batch)
            for (std::size_t p = 0; p < phases.size(); ++p) totals[p] += c[p];
        next_burst += budget.batch_bursts;
    }

    std::vector<BerPoint> out;
    for (std::size_t p = 0; p < phases.size(); ++p) {
        const auto& t = totals[p];
        BerPoint pt;
        pt.ebn0_db = ebn0_db.value_or(std::numeric_limits<double>::infinity());
        pt.epsilon = phases[p];
        pt.source = BerSource::MonteCarlo;
        pt.bit_count = t.bits;
        pt.error_count = t.bit_errors;
        pt.decision_count = t.decisions;
        pt.decision_errors = t.decision_errors;
        pt.frames = t.frames;
        pt.ber = t.bits ? static_cast<double>(t.bit_errors) / static_cast<double>(t.bits) : 0.0;
        pt.ser = t.decisions ? static_cast<double>(t.decision_errors) / static_cast<double>(t.decisions) : 0.0;
        pt.budget_exhausted = t.bits < budget.min_bits || t.decision_errors < budget.min_errors;
        out.push_back(pt);
    }
    return out;
}

/// Noiseless per-bin gains Y/X of every frame in one burst at phase eps.
inline std::vector<CVec> probe_response(const LinkSetup& link, double eps, std::size_t frames, std::uint64_t seed) {
    const auto sig = synthesize_burst(link, frames, std::nullopt, seed);
    const CVec z = sample_at_phase(sig, link, eps);
    std::vector<FrameObservation> obs;
    receive_burst(z, sig, link, receiver_model(z, link, eps, frames), &obs);
    std::vector<CVec> gains;
    for (const auto& o : obs) {
        CVec g(o.y.size());
        for (std::size_t k = 0; k < g.size(); ++k) g[k] = o.y[k] / sig.data[o.frame][k];
        gains.push_back(std::move(g));
    }
    return gains;
}

struct StrOutcome {
    StrLoopState state;
    /// Sampling phase the loop settled on relative to the undelayed signal, in
    /// symbol periods, wrapped to [-0.5, 0.5].
    double epsilon = 0.0;
};

/// Track the PN2 correlation peak over one burst. `offset` delays the matched
/// filter output by that many oversampled samples before tracking.
inline StrOutcome run_str(const LinkSetup& link, std::size_t frames, std::optional<double> ebn0_db, std::uint64_t seed,
                          double loop_gain = 0.5, double offset = 0.0) {
    const auto& cfg = link.frame;
    if (!cfg.dual_pn) throw std::invalid_argument("STR baseline tracks the second PN of a dual-PN guard");
    auto sig = synthesize_burst(link, frames, ebn0_db, seed);
    if (offset != 0.0) sig.rx = delay_samples(sig.rx, offset);
    const double l = cfg.n_upsam;
    StrGeometry geom;
    geom.first_peak = sig.delay + static_cast<double>(cfg.pn_len) * l;
    geom.frame_period = static_cast<double>(cfg.frame_len()) * l;
    geom.search_halfwidth = static_cast<std::size_t>(l * (std::ceil(link.profile.max_delay()) + 2.0));
    StrLoopState st;
    st.loop_gain = loop_gain;
    StrOutcome out;
    out.state = str_track(sig.rx, link.pn, cfg.n_upsam, geom, st, frames);
    const double last = std::round(geom.first_peak + static_cast<double>(frames - 1) * geom.frame_period);
    out.epsilon = SamplingPhase::wrap((out.state.peak_position - offset - last) / l).value();
    return out;
}

}  // namespace tdsofdm
