#pragma once

// TDS-OFDM frame construction: PN guard generation, Gray-coded QAM mapping,
// IDFT data blocks, dual-PN multiplexing and the transmit shaping chain.

#include <limits>
#include <bit>
#include <cstdint>
#include <string>
#include <string_view>

#include "tdsofdm/dsp.hpp"

namespace tdsofdm {

enum class Modulation { BPSK, QAM16, QAM64, QAM256 };

inline int modulation_order(Modulation m) {
    switch (m) {
        case Modulation::BPSK: return 2;
        case Modulation::QAM16: return 16;
        case Modulation::QAM64: return 64;
        case Modulation::QAM256: return 256;
    }
    throw std::invalid_argument("unknown modulation");
}

inline int bits_per_symbol(Modulation m) { return std::countr_zero(static_cast<unsigned>(modulation_order(m))); }

inline std::string to_string(Modulation m) {
    switch (m) {
        case Modulation::BPSK: return "bpsk";
        case Modulation::QAM16: return "qam16";
        case Modulation::QAM64: return "qam64";
        case Modulation::QAM256: return "qam256";
    }
    return "?";
}

inline Modulation parse_modulation(std::string_view s) {
    if (s == "bpsk") return Modulation::BPSK;
    if (s == "qam16" || s == "16qam") return Modulation::QAM16;
    if (s == "qam64" || s == "64qam") return Modulation::QAM64;
    if (s == "qam256" || s == "256qam") return Modulation::QAM256;
    throw std::invalid_argument("unknown modulation '" + std::string(s) + "'");
}

struct FrameConfig {
    std::size_t n_fft = 1024;
    std::size_t pn_len = 256;
    bool dual_pn = true;
    Modulation modulation = Modulation::QAM16;
    int n_upsam = 4;
    double alpha = 0.05;
    /// Guard power per sample relative to the average body power per sample.
    double pn_power_ratio = 1.0;

    void validate() const {
        if (!is_power_of_two(n_fft)) throw std::invalid_argument("n_fft must be a power of two");
        if (pn_len < 16) throw std::invalid_argument("pn_len must be >= 16");
        if (n_upsam < 2) throw std::invalid_argument("n_upsam must be >= 2");
        if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must be in (0,1]");
        if (!(pn_power_ratio >= 0.0)) throw std::invalid_argument("pn_power_ratio must be >= 0");
    }
    std::size_t guard_len() const { return pn_len * (dual_pn ? 2 : 1); }
    std::size_t frame_len() const { return guard_len() + n_fft; }
    /// Average body power per symbol-rate sample for unit-energy symbols.
    double body_power() const { return 1.0 / static_cast<double>(n_fft); }
    double guard_amplitude() const { return std::sqrt(pn_power_ratio * body_power()); }
};

// ---------------------------------------------------------------------------
// PN sequences

struct PnSequence {
    std::vector<double> chips;  // +1 / -1
    std::uint32_t polynomial = 0;
    std::uint32_t seed = 0;

    std::size_t size() const { return chips.size(); }
};

inline int polynomial_degree(std::uint32_t poly) {
    if (poly < 2) throw std::invalid_argument("LFSR polynomial must have degree >= 1");
    return 31 - std::countl_zero(poly);
}

/// Primitive polynomials (bit i = coefficient of x^i) for degrees 3..12.
inline std::uint32_t default_pn_polynomial(int degree) {
    switch (degree) {
        case 3: return 0b1011;     // x^3 + x + 1
        case 4: return 0x13;       // x^4 + x + 1
        case 5: return 0x25;       // x^5 + x^2 + 1
        case 6: return 0x43;       // x^6 + x + 1
        case 7: return 0x83;       // x^7 + x + 1
        case 8: return 0x11D;      // x^8 + x^4 + x^3 + x^2 + 1
        case 9: return 0x211;      // x^9 + x^4 + 1
        case 10: return 0x409;     // x^10 + x^3 + 1
        case 11: return 0x805;     // x^11 + x^2 + 1
        case 12: return 0x1053;    // x^12 + x^6 + x^4 + x + 1
        default: throw std::invalid_argument("no shipped PN polynomial for this degree");
    }
}

/// Fibonacci LFSR with characteristic polynomial `poly`: the sequence obeys
/// a[n+d] = sum_{i<d} c_i a[n+i] (mod 2); seed bit i is a[i].
inline std::vector<std::uint8_t> lfsr_bits(std::uint32_t poly, std::uint32_t seed, std::size_t count) {
    const int d = polynomial_degree(poly);
    if (seed == 0) throw std::invalid_argument("LFSR seed must be nonzero");
    if (d < 32 && (seed >> d) != 0) throw std::invalid_argument("LFSR seed wider than the polynomial degree");
    const std::uint32_t feedback = poly & ((1u << d) - 1u);
    std::uint32_t state = seed;  // bit i holds a[n+i]
    std::vector<std::uint8_t> out(count);
    for (std::size_t n = 0; n < count; ++n) {
        out[n] = static_cast<std::uint8_t>(state & 1u);
        const auto next = static_cast<std::uint32_t>(std::popcount(state & feedback) & 1);
        state = (state >> 1) | (next << (d - 1));
    }
    return out;
}

/// Bipolar m-sequence (bit 0 -> +1), cyclically extended or truncated to `length`.
inline PnSequence generate_pn(std::size_t length, std::uint32_t poly, std::uint32_t seed) {
    if (length == 0) throw std::invalid_argument("PN length must be positive");
    const int d = polynomial_degree(poly);
    const std::size_t period = (std::size_t{1} << d) - 1;
    const auto bits = lfsr_bits(poly, seed, std::min(length, period));
    PnSequence pn{std::vector<double>(length), poly, seed};
    for (std::size_t k = 0; k < length; ++k) pn.chips[k] = bits[k % bits.size()] ? -1.0 : 1.0;
    return pn;
}

/// m-sequence of period 2^d - 1 <= length, d = floor(log2(length + 1)).
inline PnSequence make_default_pn(std::size_t length, std::uint32_t seed = 1) {
    const int degree = std::bit_width(length + 1) - 1;
    return generate_pn(length, default_pn_polynomial(std::clamp(degree, 3, 12)), seed);
}

// ---------------------------------------------------------------------------
// Gray-coded constellations

inline unsigned gray_encode(unsigned v) { return v ^ (v >> 1); }

/// Square Gray-mapped QAM (or BPSK). Label bits are MSB-first; the upper half
/// of the label selects the in-phase level, the lower half the quadrature level.
class QamConstellation {
public:
    explicit QamConstellation(Modulation m) : modulation_(m), order_(modulation_order(m)), bits_(bits_per_symbol(m)) {
        if (m == Modulation::BPSK) {
            levels_ = 2;
            scale_ = 1.0;
            points_ = {cplx(1.0, 0.0), cplx(-1.0, 0.0)};
            return;
        }
        levels_ = 1 << (bits_ / 2);
        scale_ = std::sqrt(3.0 / (2.0 * (order_ - 1)));
        level_gray_.resize(static_cast<std::size_t>(levels_));
        for (int l = 0; l < levels_; ++l) level_gray_[static_cast<std::size_t>(l)] = gray_encode(static_cast<unsigned>(l));
        gray_level_.resize(static_cast<std::size_t>(levels_));
        for (int l = 0; l < levels_; ++l) gray_level_[level_gray_[static_cast<std::size_t>(l)]] = l;
        points_.resize(static_cast<std::size_t>(order_));
        for (unsigned label = 0; label < static_cast<unsigned>(order_); ++label) {
            const int li = gray_level_[label >> (bits_ / 2)];
            const int lq = gray_level_[label & static_cast<unsigned>(levels_ - 1)];
            points_[label] = scale_ * cplx(2.0 * li - (levels_ - 1), 2.0 * lq - (levels_ - 1));
        }
    }

    Modulation modulation() const { return modulation_; }
    int order() const { return order_; }
    int bits() const { return bits_; }
    /// Amplitude levels per axis (kappa); 2 for BPSK.
    int levels() const { return levels_; }
    /// Independent decisions per symbol: 1 for BPSK, 2 (I and Q) for QAM.
    int dimensions() const { return modulation_ == Modulation::BPSK ? 1 : 2; }
    const CVec& points() const { return points_; }
    const cplx& point(unsigned label) const { return points_.at(label); }

    /// Nearest point label. Exact midpoints resolve to the lower label.
    unsigned slice(cplx z) const {
        if (modulation_ == Modulation::BPSK) return z.real() >= 0.0 ? 0u : 1u;
        const int li = slice_axis(z.real());
        const int lq = slice_axis(z.imag());
        return (level_gray_[static_cast<std::size_t>(li)] << (bits_ / 2)) | level_gray_[static_cast<std::size_t>(lq)];
    }

    /// Posterior mean of the sent point given z = x + noise, complex noise
    /// variance `var`, equiprobable points. Hard decision when var is 0.
    cplx soft_point(cplx z, double var) const {
        if (!(var > 0.0)) return point(slice(z));
        if (!std::isfinite(var)) return {};
        if (modulation_ == Modulation::BPSK) return {std::tanh(2.0 * z.real() / var), 0.0};
        return {soft_axis(z.real(), var), soft_axis(z.imag(), var)};
    }

    /// Per-axis decision errors between transmitted label `tx` and decision `rx`.
    int axis_errors(unsigned tx, unsigned rx) const {
        if (modulation_ == Modulation::BPSK) return tx != rx ? 1 : 0;
        const unsigned half = static_cast<unsigned>(bits_ / 2);
        const unsigned mask = (1u << half) - 1u;
        return ((tx >> half) != (rx >> half) ? 1 : 0) + ((tx & mask) != (rx & mask) ? 1 : 0);
    }

private:
    double soft_axis(double u, double var) const {
        double best = std::numeric_limits<double>::infinity();
        for (int l = 0; l < levels_; ++l) best = std::min(best, std::norm(u - scale_ * (2.0 * l - (levels_ - 1))));
        double num = 0.0, den = 0.0;
        for (int l = 0; l < levels_; ++l) {
            const double a = scale_ * (2.0 * l - (levels_ - 1));
            const double w = std::exp(-((u - a) * (u - a) - best) / var);
            num += w * a;
            den += w;
        }
        return num / den;
    }

    int slice_axis(double u) const {
        const double l = (u / scale_ + (levels_ - 1)) / 2.0;
        if (l <= 0.0) return 0;
        if (l >= levels_ - 1) return levels_ - 1;
        const double fl = std::floor(l);
        const double frac = l - fl;
        const int lo = static_cast<int>(fl);
        if (std::abs(frac - 0.5) < 1e-12)
            return level_gray_[static_cast<std::size_t>(lo)] < level_gray_[static_cast<std::size_t>(lo + 1)] ? lo : lo + 1;
        return frac < 0.5 ? lo : lo + 1;
    }

    Modulation modulation_;
    int order_;
    int bits_;
    int levels_ = 2;
    double scale_ = 1.0;
    CVec points_;
    std::vector<unsigned> level_gray_;
    std::vector<int> gray_level_;
};

inline const QamConstellation& constellation(Modulation m) {
    static const QamConstellation bpsk(Modulation::BPSK);
    static const QamConstellation q16(Modulation::QAM16);
    static const QamConstellation q64(Modulation::QAM64);
    static const QamConstellation q256(Modulation::QAM256);
    switch (m) {
        case Modulation::BPSK: return bpsk;
        case Modulation::QAM16: return q16;
        case Modulation::QAM64: return q64;
        case Modulation::QAM256: return q256;
    }
    throw std::invalid_argument("unknown modulation");
}

inline std::vector<unsigned> bits_to_labels(std::span<const std::uint8_t> bits, int bits_per_sym) {
    if (bits.size() % static_cast<std::size_t>(bits_per_sym) != 0)
        throw std::invalid_argument("bit count is not a multiple of bits per symbol");
    std::vector<unsigned> labels(bits.size() / static_cast<std::size_t>(bits_per_sym));
    for (std::size_t s = 0; s < labels.size(); ++s) {
        unsigned v = 0;
        for (int b = 0; b < bits_per_sym; ++b) v = (v << 1) | (bits[s * static_cast<std::size_t>(bits_per_sym) + static_cast<std::size_t>(b)] & 1u);
        labels[s] = v;
    }
    return labels;
}

inline CVec qam_modulate(std::span<const std::uint8_t> bits, const QamConstellation& c) {
    const auto labels = bits_to_labels(bits, c.bits());
    CVec out(labels.size());
    for (std::size_t s = 0; s < labels.size(); ++s) out[s] = c.point(labels[s]);
    return out;
}

inline std::vector<std::uint8_t> qam_demodulate(std::span<const cplx> symbols, const QamConstellation& c) {
    std::vector<std::uint8_t> bits;
    bits.reserve(symbols.size() * static_cast<std::size_t>(c.bits()));
    for (const auto& z : symbols) {
        const unsigned label = c.slice(z);
        for (int b = c.bits() - 1; b >= 0; --b) bits.push_back(static_cast<std::uint8_t>((label >> b) & 1u));
    }
    return bits;
}

// ---------------------------------------------------------------------------
// Frames

struct TdsFrame {
    CVec guard;
    CVec body;

    std::size_t size() const { return guard.size() + body.size(); }
    CVec samples() const {
        CVec out(guard);
        out.insert(out.end(), body.begin(), body.end());
        return out;
    }
};

/// Guard samples for one frame: PN scaled to the configured power, twice for DPN.
inline CVec make_guard(const PnSequence& pn, const FrameConfig& cfg) {
    if (pn.size() != cfg.pn_len) throw std::invalid_argument("PN length does not match pn_len");
    const double amp = cfg.guard_amplitude();
    CVec g;
    g.reserve(cfg.guard_len());
    for (int rep = 0; rep < (cfg.dual_pn ? 2 : 1); ++rep)
        for (double c : pn.chips) g.emplace_back(amp * c, 0.0);
    return g;
}

inline TdsFrame build_frame(std::span<const cplx> data_syms, const PnSequence& pn, const FrameConfig& cfg) {
    cfg.validate();
    if (data_syms.size() != cfg.n_fft) throw std::invalid_argument("data symbol count must equal n_fft");
    return TdsFrame{make_guard(pn, cfg), idft(data_syms)};
}

/// Upsample by n_upsam and SRRC-shape a symbol-rate stream (full convolution).
inline SignalBuffer shape_symbols(std::span<const cplx> symbols, const FrameConfig& cfg, const SrrcSpec& srrc) {
    if (srrc.samples_per_symbol != cfg.n_upsam) throw std::invalid_argument("SRRC samples_per_symbol must equal n_upsam");
    const auto taps = design_srrc_taps(srrc);
    const SignalBuffer up = upsample(SignalBuffer{CVec(symbols.begin(), symbols.end()), RateTag::symbol_rate(), 0}, cfg.n_upsam);
    SignalBuffer out{convolve<double>(up.samples, taps), up.rate, srrc.group_delay()};
    return out;
}

inline SignalBuffer transmit_chain(std::span<const TdsFrame> frames, const FrameConfig& cfg, const SrrcSpec& srrc) {
    CVec stream;
    for (const auto& f : frames) {
        stream.insert(stream.end(), f.guard.begin(), f.guard.end());
        stream.insert(stream.end(), f.body.begin(), f.body.end());
    }
    return shape_symbols(stream, cfg, srrc);
}

}  // namespace tdsofdm
