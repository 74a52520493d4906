#pragma once

// Multipath/AWGN channel at the oversampled rate, the sampling-phase model and
// the analytic equivalent symbol-rate response H(n/N; eps).

#include <concepts>
#include <fstream>
#include <istream>
#include <limits>
#include <random>
#include <sstream>
#include <string>

#include "tdsofdm/frame.hpp"

namespace tdsofdm {

struct ChannelTap {
    double delay = 0.0;  // symbol periods
    cplx gain{1.0, 0.0};
};

struct ChannelProfile {
    std::string name = "awgn";
    std::vector<ChannelTap> taps{ChannelTap{}};

    static ChannelProfile awgn() { return ChannelProfile{}; }

    /// Validate delays and scale gains to unit total power.
    void normalize() {
        if (taps.empty()) throw std::invalid_argument("channel profile has no taps");
        double power = 0.0;
        for (std::size_t i = 0; i < taps.size(); ++i) {
            if (!(taps[i].delay >= 0.0)) throw std::invalid_argument("channel tap delays must be >= 0");
            if (i > 0 && !(taps[i].delay > taps[i - 1].delay))
                throw std::invalid_argument("channel tap delays must be strictly increasing");
            power += std::norm(taps[i].gain);
        }
        if (!(power > 0.0)) throw std::invalid_argument("channel profile has zero power");
        const double s = 1.0 / std::sqrt(power);
        for (auto& t : taps) t.gain *= s;
    }

    bool is_awgn() const { return taps.size() == 1 && taps[0].delay == 0.0; }
    double max_delay() const { return taps.back().delay; }

    /// H_C(f) = sum_i g_i exp(-j 2 pi f d_i), f in cycles per symbol.
    cplx response(double f) const {
        cplx acc{};
        for (const auto& t : taps) acc += t.gain * std::polar(1.0, -2.0 * kPi * f * t.delay);
        return acc;
    }
};

inline ChannelProfile make_profile(std::string name, std::vector<ChannelTap> taps) {
    ChannelProfile p{std::move(name), std::move(taps)};
    p.normalize();
    return p;
}

/// Parse `delay_symbols gain_re gain_im` lines; `#` starts a comment.
inline ChannelProfile parse_profile(std::istream& in, std::string name) {
    std::vector<ChannelTap> taps;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        double d = 0.0, re = 0.0, im = 0.0;
        if (!(ls >> d)) continue;
        if (!(ls >> re >> im)) throw std::invalid_argument("profile line " + std::to_string(lineno) + ": expected 'delay re im'");
        std::string extra;
        if (ls >> extra) throw std::invalid_argument("profile line " + std::to_string(lineno) + ": trailing tokens");
        taps.push_back({d, {re, im}});
    }
    return make_profile(std::move(name), std::move(taps));
}

inline ChannelProfile load_profile(const std::string& path) {
    if (path == "awgn") return ChannelProfile::awgn();
    std::ifstream f(path);
    if (!f) throw std::invalid_argument("cannot open channel profile '" + path + "'");
    auto slash = path.find_last_of('/');
    return parse_profile(f, slash == std::string::npos ? path : path.substr(slash + 1));
}

/// Normalized sampling phase offset in symbol periods, held in [-0.5, 0.5].
class SamplingPhase {
public:
    SamplingPhase() = default;
    explicit SamplingPhase(double eps) : value_(eps) {
        if (!(eps >= -0.5 && eps <= 0.5)) throw std::out_of_range("sampling phase must lie in [-0.5, 0.5]");
    }
    static SamplingPhase wrap(double eps) {
        double w = eps - std::floor(eps + 0.5);
        return SamplingPhase(w);
    }
    double value() const { return value_; }
    SamplingPhase operator+(double d) const { return wrap(value_ + d); }
    friend bool operator==(const SamplingPhase&, const SamplingPhase&) = default;

private:
    double value_ = 0.0;
};

struct EquivResponse {
    CVec h;
    double epsilon = 0.0;
    double alpha = 0.0;
    std::string profile;

    std::size_t size() const { return h.size(); }
};

/// y[k] = sum_i g_i x(k - d_i * n_upsam); same length as x.
inline SignalBuffer apply_channel(const SignalBuffer& x, const ChannelProfile& profile) {
    SignalBuffer y{CVec(x.size()), x.rate, x.group_delay};
    const double sps = x.rate.oversampling;
    for (const auto& tap : profile.taps) {
        const CVec d = delay_samples(x.samples, tap.delay * sps);
        for (std::size_t k = 0; k < y.size(); ++k) y.samples[k] += tap.gain * d[k];
    }
    return y;
}

/// Complex noise variance per sample for a signal of per-sample power `signal_power`.
inline double awgn_variance(double ebn0_db, int bits_per_symbol, int oversampling, double signal_power) {
    return signal_power * oversampling / (bits_per_symbol * db_to_linear(ebn0_db));
}

/// Adds circular Gaussian noise with sigma^2 = P * os / (2 * bits * Eb/N0) per
/// real dimension. `signal_power` is the per-sample power of the OFDM body at
/// the rate of x.
template <typename Rng>
SignalBuffer add_awgn(const SignalBuffer& x, double ebn0_db, int bits_per_symbol, int oversampling, double signal_power,
                      Rng& rng) {
    const double sigma = std::sqrt(0.5 * awgn_variance(ebn0_db, bits_per_symbol, oversampling, signal_power));
    SignalBuffer y = x;
    std::normal_distribution<double> n(0.0, 1.0);
    for (auto& v : y.samples) {
        const double re = n(rng);
        const double im = n(rng);
        v += sigma * cplx(re, im);
    }
    return y;
}

/// Aliased-sum response over images |k| <= 2; exact because the raised-cosine
/// support |f| < (1+alpha)/2 never reaches a third image. `epsilon` is any
/// real phase in symbol periods (not wrapped).
inline EquivResponse equiv_response(const ChannelProfile& profile, double alpha, double epsilon, std::size_t n) {
    EquivResponse r{CVec(n), epsilon, alpha, profile.name};
    for (std::size_t i = 0; i < n; ++i) {
        const double f = static_cast<double>(i) / static_cast<double>(n);
        cplx acc{};
        for (int k = -2; k <= 2; ++k) {
            const double fk = f - k;
            const double p = srrc_freq_response(fk, alpha);
            if (p == 0.0) continue;
            acc += profile.response(fk) * p * std::polar(1.0, 2.0 * kPi * fk * epsilon);
        }
        r.h[i] = acc;
    }
    return r;
}

inline EquivResponse equiv_response(const ChannelProfile& profile, double alpha, SamplingPhase eps, std::size_t n) {
    return equiv_response(profile, alpha, eps.value(), n);
}

/// Closed-form AWGN response, three branches over f in [0, 1).
inline cplx equiv_response_awgn(double alpha, double epsilon, double f) {
    if (!(f >= 0.0 && f < 1.0)) throw std::out_of_range("normalized frequency must lie in [0, 1)");
    const double lo = 0.5 * (1.0 - alpha);
    const double hi = 0.5 * (1.0 + alpha);
    if (f < lo) return std::polar(1.0, 2.0 * kPi * epsilon * f);
    if (f < hi) {
        const cplx inner(std::cos(kPi * epsilon), std::sin(kPi / alpha * (0.5 - f)) * std::sin(kPi * epsilon));
        return std::polar(1.0, 2.0 * kPi * epsilon * (f - 0.5)) * inner;
    }
    return std::polar(1.0, 2.0 * kPi * epsilon * (f - 1.0));
}

template <std::integral I>
EquivResponse equiv_response_awgn(double alpha, double epsilon, I bins) {
    const auto n = static_cast<std::size_t>(bins);
    EquivResponse r{CVec(n), epsilon, alpha, "awgn"};
    for (std::size_t i = 0; i < n; ++i)
        r.h[i] = equiv_response_awgn(alpha, epsilon, static_cast<double>(i) / static_cast<double>(n));
    return r;
}

/// Least-squares response estimate from received dual-PN guards.
///
/// `rx_windows` holds n_avg windows of pn.size() symbol-rate samples, each
/// starting `lead` samples before the second PN of a guard. The first PN acts
/// as a cyclic prefix, so each window is the circular convolution of the PN
/// with the equivalent impulse response, rotated by `lead`. The per-bin ratio
/// is averaged, taken to the time domain and zero-padded to N bins.
/// `amplitude` is the chip amplitude used by the transmitter.
inline EquivResponse estimate_response_from_pn(std::span<const cplx> rx_windows, const PnSequence& pn, std::size_t n,
                                               std::size_t n_avg, std::size_t lead, double amplitude = 1.0) {
    const std::size_t p = pn.size();
    if (n_avg == 0) throw std::invalid_argument("n_avg must be positive");
    if (rx_windows.size() < n_avg * p) throw std::invalid_argument("not enough received guard samples");
    if (!is_power_of_two(p)) throw std::invalid_argument("PN length must be a power of two for estimation");
    if (n < p) throw std::invalid_argument("N must be at least the PN length");
    if (lead >= p) throw std::invalid_argument("window lead must be shorter than the PN");

    CVec pn_c(p);
    for (std::size_t k = 0; k < p; ++k) pn_c[k] = amplitude * pn.chips[k];
    const CVec pn_f = dft(pn_c);
    double mean_mag = 0.0;
    for (const auto& v : pn_f) mean_mag += std::abs(v);
    mean_mag /= static_cast<double>(p);
    for (const auto& v : pn_f)
        if (std::abs(v) < 1e-6 * mean_mag) throw std::domain_error("PN spectrum has a near-zero bin");

    CVec acc(p);
    for (std::size_t w = 0; w < n_avg; ++w) {
        const CVec rx_f = dft(rx_windows.subspan(w * p, p));
        for (std::size_t k = 0; k < p; ++k) {
            const cplx rot = std::polar(1.0, 2.0 * kPi * static_cast<double>(k * lead % p) / static_cast<double>(p));
            acc[k] += rx_f[k] / pn_f[k] * rot;
        }
    }
    for (auto& v : acc) v /= static_cast<double>(n_avg);

    const CVec g = idft(acc);
    CVec padded(n);
    for (std::size_t t = 0; t < p; ++t) {
        const std::size_t dst = t < p / 2 ? t : n - (p - t);
        padded[dst] = g[t];
    }
    return EquivResponse{dft(padded), std::numeric_limits<double>::quiet_NaN(), 0.0, "pn-estimate"};
}

}  // namespace tdsofdm
