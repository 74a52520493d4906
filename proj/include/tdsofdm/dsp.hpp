#pragma once

// Signal-processing primitives shared by the TDS-OFDM chain: SRRC design and
// analytic response, zero-stuffing/decimation, windowed-sinc fractional delay,
// FFT-backed DFT and the Gaussian tail function.

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <mutex>
#include <numbers>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace tdsofdm {

using cplx = std::complex<double>;
using CVec = std::vector<cplx>;

inline constexpr double kPi = std::numbers::pi;

/// Sample-rate tag: oversampling == 1 is the symbol rate.
struct RateTag {
    int oversampling = 1;

    static constexpr RateTag symbol_rate() { return RateTag{1}; }
    static constexpr RateTag oversampled(int factor) { return RateTag{factor}; }
    bool is_symbol_rate() const { return oversampling == 1; }
    friend bool operator==(const RateTag&, const RateTag&) = default;
};

struct SignalBuffer {
    CVec samples;
    RateTag rate;
    /// Delay (in samples at this rate) introduced by filtering upstream.
    std::size_t group_delay = 0;

    std::size_t size() const { return samples.size(); }
};

inline void require_same_rate(const SignalBuffer& a, const SignalBuffer& b) {
    if (!(a.rate == b.rate)) throw std::invalid_argument("sample-rate tags differ");
}

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// ---------------------------------------------------------------------------
// Square-root raised cosine

struct SrrcSpec {
    double alpha = 0.05;
    int span_symbols = 64;
    int samples_per_symbol = 4;

    void validate() const {
        if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("SRRC roll-off must be in (0,1]");
        if (span_symbols < 4) throw std::invalid_argument("SRRC span must be >= 4 symbols");
        if (samples_per_symbol < 2) throw std::invalid_argument("SRRC samples_per_symbol must be >= 2");
    }
    std::size_t tap_count() const {
        return 2 * static_cast<std::size_t>(span_symbols) * static_cast<std::size_t>(samples_per_symbol) + 1;
    }
    /// Group delay of one filter, in oversampled samples.
    std::size_t group_delay() const { return tap_count() / 2; }
};

/// Combined (transmit x receive) raised-cosine magnitude on the symbol-rate
/// frequency axis, with T_sym normalized to 1. Not periodic: f beyond the
/// roll-off edge returns 0.
inline double srrc_freq_response(double f, double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("roll-off must be in (0,1]");
    const double af = std::abs(f);
    const double lo = 0.5 * (1.0 - alpha);
    const double hi = 0.5 * (1.0 + alpha);
    if (af < lo) return 1.0;
    if (af < hi) return 0.5 * (1.0 + std::sin(kPi / (2.0 * alpha) * (1.0 - 2.0 * af)));
    return 0.0;
}

namespace detail {

// Closed-form SRRC impulse response at t (in symbol periods), unnormalized.
inline double srrc_impulse(double t, double alpha) {
    constexpr double kSingularTol = 1e-9;
    if (std::abs(t) < kSingularTol) return 1.0 - alpha + 4.0 * alpha / kPi;
    const double quarter = 1.0 / (4.0 * alpha);
    if (std::abs(std::abs(t) - quarter) < kSingularTol) {
        const double a = kPi / (4.0 * alpha);
        return alpha / std::sqrt(2.0) *
               ((1.0 + 2.0 / kPi) * std::sin(a) + (1.0 - 2.0 / kPi) * std::cos(a));
    }
    const double x = 4.0 * alpha * t;
    return (std::sin(kPi * t * (1.0 - alpha)) + x * std::cos(kPi * t * (1.0 + alpha))) /
           (kPi * t * (1.0 - x * x));
}

}  // namespace detail

/// Truncated SRRC taps at samples_per_symbol, unit energy, odd length.
inline std::vector<double> design_srrc_taps(const SrrcSpec& spec) {
    spec.validate();
    const std::size_t n = spec.tap_count();
    const auto center = static_cast<long>(n / 2);
    std::vector<double> taps(n);
    double energy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(static_cast<long>(i) - center) / spec.samples_per_symbol;
        taps[i] = detail::srrc_impulse(t, spec.alpha);
        energy += taps[i] * taps[i];
    }
    const double scale = 1.0 / std::sqrt(energy);
    for (auto& v : taps) v *= scale;
    return taps;
}

// ---------------------------------------------------------------------------
// Rate conversion

inline SignalBuffer upsample(const SignalBuffer& x, int factor) {
    if (factor < 2) throw std::invalid_argument("upsampling factor must be >= 2");
    if (!x.rate.is_symbol_rate()) throw std::invalid_argument("upsample expects a symbol-rate buffer");
    SignalBuffer out{CVec(x.size() * static_cast<std::size_t>(factor)), RateTag::oversampled(factor), 0};
    for (std::size_t k = 0; k < x.size(); ++k) out.samples[k * static_cast<std::size_t>(factor)] = x.samples[k];
    return out;
}

inline SignalBuffer downsample(const SignalBuffer& x, int factor, int offset) {
    if (factor < 2) throw std::invalid_argument("downsampling factor must be >= 2");
    if (offset < 0 || offset >= factor) throw std::out_of_range("downsample offset must lie in [0, factor)");
    if (x.rate.oversampling != factor) throw std::invalid_argument("rate tag does not match downsampling factor");
    SignalBuffer out{{}, RateTag::symbol_rate(), 0};
    for (std::size_t k = static_cast<std::size_t>(offset); k < x.size(); k += static_cast<std::size_t>(factor))
        out.samples.push_back(x.samples[k]);
    return out;
}

// ---------------------------------------------------------------------------
// DFT (unnormalized forward, 1/N inverse)

namespace detail {

class FftPlanCache {
public:
    static FftPlanCache& instance() {
        static FftPlanCache cache;
        return cache;
    }

    fftw_plan plan(std::size_t n, int sign) {
        std::lock_guard lock(mutex_);
        auto key = std::make_pair(n, sign);
        if (auto it = plans_.find(key); it != plans_.end()) return it->second;
        CVec in(n), out(n);
        fftw_plan p = fftw_plan_dft_1d(static_cast<int>(n), reinterpret_cast<fftw_complex*>(in.data()),
                                       reinterpret_cast<fftw_complex*>(out.data()), sign,
                                       FFTW_ESTIMATE | FFTW_UNALIGNED);
        plans_.emplace(key, p);
        return p;
    }

    FftPlanCache(const FftPlanCache&) = delete;
    FftPlanCache& operator=(const FftPlanCache&) = delete;

private:
    FftPlanCache() = default;
    ~FftPlanCache() {
        for (auto& [key, p] : plans_) fftw_destroy_plan(p);
    }

    std::mutex mutex_;
    std::map<std::pair<std::size_t, int>, fftw_plan> plans_;
};

inline CVec fft_raw(std::span<const cplx> x, int sign) {
    if (!is_power_of_two(x.size())) throw std::invalid_argument("DFT length must be a power of two");
    CVec in(x.begin(), x.end());
    CVec out(x.size());
    fftw_plan p = FftPlanCache::instance().plan(x.size(), sign);
    fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(in.data()), reinterpret_cast<fftw_complex*>(out.data()));
    return out;
}

}  // namespace detail

inline CVec dft(std::span<const cplx> x) { return detail::fft_raw(x, FFTW_FORWARD); }

inline CVec idft(std::span<const cplx> X) {
    CVec out = detail::fft_raw(X, FFTW_BACKWARD);
    const double scale = 1.0 / static_cast<double>(X.size());
    for (auto& v : out) v *= scale;
    return out;
}

inline CVec dft(const SignalBuffer& x) { return dft(std::span<const cplx>(x.samples)); }

// ---------------------------------------------------------------------------
// Convolution

/// Full linear convolution, length x.size() + taps.size() - 1. Long inputs go
/// through FFT overlap-add.
template <typename Tap>
CVec convolve(std::span<const cplx> x, std::span<const Tap> taps) {
    if (x.empty() || taps.empty()) return {};
    const std::size_t out_len = x.size() + taps.size() - 1;
    CVec y(out_len);
    if (taps.size() < 32 || x.size() < 256) {
        for (std::size_t i = 0; i < x.size(); ++i) {
            const cplx xi = x[i];
            if (xi == cplx{}) continue;
            for (std::size_t j = 0; j < taps.size(); ++j) y[i + j] += xi * taps[j];
        }
        return y;
    }
    std::size_t nfft = 1;
    while (nfft < 4 * taps.size()) nfft <<= 1;
    const std::size_t block = nfft - taps.size() + 1;
    CVec h(nfft);
    for (std::size_t j = 0; j < taps.size(); ++j) h[j] = cplx(taps[j]);
    const CVec H = dft(h);
    CVec seg(nfft);
    for (std::size_t start = 0; start < x.size(); start += block) {
        const std::size_t len = std::min(block, x.size() - start);
        std::fill(seg.begin(), seg.end(), cplx{});
        std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(start), len, seg.begin());
        CVec S = dft(seg);
        for (std::size_t k = 0; k < nfft; ++k) S[k] *= H[k];
        const CVec s = idft(S);
        const std::size_t valid = std::min(nfft, out_len - start);
        for (std::size_t k = 0; k < valid; ++k) y[start + k] += s[k];
    }
    return y;
}

// ---------------------------------------------------------------------------
// Fractional delay: 63-tap Blackman-windowed sinc

inline constexpr int kFracDelayHalf = 31;
inline constexpr std::size_t kFracDelayTaps = 2 * kFracDelayHalf + 1;

namespace detail {

inline double sinc(double t) {
    if (t == 0.0) return 1.0;
    const double r = std::round(t);
    if (r != 0.0 && std::abs(t - r) < 1e-15) return 0.0;
    return std::sin(kPi * t) / (kPi * t);
}

}  // namespace detail

/// Taps h[n], n = -31..31 (stored at n + 31), realizing y[k] = x(k - mu).
inline std::array<double, kFracDelayTaps> fractional_delay_taps(double mu) {
    if (!(mu >= -0.5 && mu <= 0.5)) throw std::invalid_argument("fractional delay must lie in [-0.5, 0.5]");
    std::array<double, kFracDelayTaps> h{};
    if (mu == 0.0) {
        h[kFracDelayHalf] = 1.0;
        return h;
    }
    constexpr double half_window = kFracDelayHalf + 1.0;
    double sum = 0.0;
    for (int n = -kFracDelayHalf; n <= kFracDelayHalf; ++n) {
        const double t = n - mu;
        const double w = 0.42 + 0.5 * std::cos(kPi * t / half_window) + 0.08 * std::cos(2.0 * kPi * t / half_window);
        h[static_cast<std::size_t>(n + kFracDelayHalf)] = detail::sinc(t) * w;
        sum += h[static_cast<std::size_t>(n + kFracDelayHalf)];
    }
    for (auto& v : h) v /= sum;
    return h;
}

/// Evaluate x at `count` real-valued positions first, first + stride, ...
/// Samples outside the buffer read as zero.
inline CVec resample_at(std::span<const cplx> x, double first, std::size_t stride, std::size_t count) {
    const double anchor = std::round(first);
    const double mu = anchor - first;  // x(first) = x(anchor - mu)
    const auto h = fractional_delay_taps(std::clamp(mu, -0.5, 0.5));
    const auto n = static_cast<long>(x.size());
    CVec out(count);
    for (std::size_t m = 0; m < count; ++m) {
        const long c = static_cast<long>(anchor) + static_cast<long>(m * stride);
        if (mu == 0.0) {
            out[m] = (c >= 0 && c < n) ? x[static_cast<std::size_t>(c)] : cplx{};
            continue;
        }
        cplx acc{};
        for (int j = -kFracDelayHalf; j <= kFracDelayHalf; ++j) {
            const long idx = c - j;
            if (idx < 0 || idx >= n) continue;
            acc += h[static_cast<std::size_t>(j + kFracDelayHalf)] * x[static_cast<std::size_t>(idx)];
        }
        out[m] = acc;
    }
    return out;
}

inline cplx interpolate_at(std::span<const cplx> x, double position) { return resample_at(x, position, 1, 1)[0]; }

/// Delay by mu samples (|mu| <= 0.5), same length, centered filter.
inline SignalBuffer fractional_delay(const SignalBuffer& x, double mu) {
    if (!(mu >= -0.5 && mu <= 0.5)) throw std::invalid_argument("fractional delay must lie in [-0.5, 0.5]");
    SignalBuffer out = x;
    out.samples = resample_at(x.samples, -mu, 1, x.size());
    return out;
}

/// Delay by an arbitrary non-negative or negative amount: integer shift plus
/// fractional remainder. Output keeps the input length.
inline CVec delay_samples(std::span<const cplx> x, double delay) { return resample_at(x, -delay, 1, x.size()); }

// ---------------------------------------------------------------------------

/// Gaussian tail probability Q(x).
inline double qfunc(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

inline double mean_power(std::span<const cplx> x) {
    if (x.empty()) return 0.0;
    double acc = 0.0;
    for (const auto& v : x) acc += std::norm(v);
    return acc / static_cast<double>(x.size());
}

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

}  // namespace tdsofdm
