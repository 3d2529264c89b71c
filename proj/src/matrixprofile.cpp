#include "kneescout/matrixprofile.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <numeric>
#include <thread>

#include <fftw3.h>

#include "kneescout/error.hpp"

namespace kneescout {

namespace {

std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

struct FftwFree {
    void operator()(void* p) const noexcept { fftw_free(p); }
};
struct PlanDestroy {
    void operator()(fftw_plan p) const noexcept {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(p);
    }
};
using RealBuffer = std::unique_ptr<double[], FftwFree>;
using ComplexBuffer = std::unique_ptr<fftw_complex[], FftwFree>;
using Plan = std::unique_ptr<std::remove_pointer_t<fftw_plan>, PlanDestroy>;

RealBuffer alloc_real(std::size_t n) { return RealBuffer(fftw_alloc_real(n)); }
ComplexBuffer alloc_complex(std::size_t n) { return ComplexBuffer(fftw_alloc_complex(n)); }

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

// Precomputed transform of the series; each call to `dot` correlates one query against it.
class SlidingDot {
public:
    SlidingDot(std::span<const double> series, std::size_t window)
        : m_(series.size()), window_(window), nfft_(next_pow2(2 * series.size())), bins_(nfft_ / 2 + 1) {
        auto in = alloc_real(nfft_);
        auto out = alloc_complex(bins_);
        {
            std::lock_guard lock(planner_mutex());
            forward_.reset(fftw_plan_dft_r2c_1d(static_cast<int>(nfft_), in.get(), out.get(), FFTW_ESTIMATE));
            inverse_.reset(fftw_plan_dft_c2r_1d(static_cast<int>(nfft_), out.get(), in.get(), FFTW_ESTIMATE));
        }
        // centering shrinks the global round-off without changing z-normalized distances
        const double centre = std::accumulate(series.begin(), series.end(), 0.0) / static_cast<double>(m_);
        std::fill(in.get(), in.get() + nfft_, 0.0);
        for (std::size_t i = 0; i < m_; ++i) in[i] = series[i] - centre;
        series_hat_ = alloc_complex(bins_);
        fftw_execute_dft_r2c(forward_.get(), in.get(), series_hat_.get());
    }

    struct Scratch {
        RealBuffer real;
        ComplexBuffer spec;
    };
    Scratch make_scratch() const { return {alloc_real(nfft_), alloc_complex(bins_)}; }

    // out[k] = sum_i q[i] * series[k + i] for k in [0, m - window]
    void dot(std::span<const double> q, Scratch& s, std::span<double> out) const {
        std::fill(s.real.get(), s.real.get() + nfft_, 0.0);
        for (std::size_t i = 0; i < window_; ++i) s.real[i] = q[window_ - 1 - i];
        fftw_execute_dft_r2c(forward_.get(), s.real.get(), s.spec.get());
        for (std::size_t b = 0; b < bins_; ++b) {
            const double ar = s.spec[b][0], ai = s.spec[b][1];
            const double br = series_hat_[b][0], bi = series_hat_[b][1];
            s.spec[b][0] = ar * br - ai * bi;
            s.spec[b][1] = ar * bi + ai * br;
        }
        fftw_execute_dft_c2r(inverse_.get(), s.spec.get(), s.real.get());
        const double scale = 1.0 / static_cast<double>(nfft_);
        for (std::size_t k = 0; k + window_ <= m_; ++k) out[k] = s.real[k + window_ - 1] * scale;
    }

private:
    std::size_t m_;
    std::size_t window_;
    std::size_t nfft_;
    std::size_t bins_;
    Plan forward_;
    Plan inverse_;
    ComplexBuffer series_hat_;
};

// z-normalized query (zeros when flat) so the sliding dot product is insensitive to window offsets
std::vector<double> normalized_query(std::span<const double> q, double mean, double sd) {
    std::vector<double> z(q.size(), 0.0);
    if (sd < kFlatStd) return z;
    for (std::size_t i = 0; i < q.size(); ++i) z[i] = (q[i] - mean) / sd;
    return z;
}

void fill_profile(std::span<const double> dots, bool query_flat, const WindowStats& stats, std::size_t window,
                  std::span<double> out) {
    const double len = static_cast<double>(window);
    for (std::size_t k = 0; k < out.size(); ++k) {
        const bool flat = stats.std[k] < kFlatStd;
        if (query_flat || flat) {
            out[k] = (query_flat && flat) ? 0.0 : std::sqrt(len);
            continue;
        }
        const double rho = std::clamp(dots[k] / (len * stats.std[k]), -1.0, 1.0);
        out[k] = std::sqrt(std::max(0.0, 2.0 * len * (1.0 - rho)));
    }
}

}  // namespace

WindowStats sliding_stats(std::span<const double> series, int window) {
    const auto w = static_cast<std::size_t>(window);
    const std::size_t count = series.size() - w + 1;
    WindowStats s{std::vector<double>(count), std::vector<double>(count)};
    for (std::size_t k = 0; k < count; ++k) {
        double mean = 0.0;
        for (std::size_t i = 0; i < w; ++i) mean += series[k + i];
        mean /= static_cast<double>(w);
        double ss = 0.0;
        for (std::size_t i = 0; i < w; ++i) {
            const double d = series[k + i] - mean;
            ss += d * d;
        }
        s.mean[k] = mean;
        s.std[k] = std::sqrt(ss / static_cast<double>(w));
    }
    return s;
}

double znorm_distance(std::span<const double> a, std::span<const double> b) {
    const auto sa = sliding_stats(a, static_cast<int>(a.size()));
    const auto sb = sliding_stats(b, static_cast<int>(b.size()));
    const bool fa = sa.std[0] < kFlatStd;
    const bool fb = sb.std[0] < kFlatStd;
    if (fa || fb) return (fa && fb) ? 0.0 : std::sqrt(static_cast<double>(a.size()));
    double ss = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = (a[i] - sa.mean[0]) / sa.std[0] - (b[i] - sb.mean[0]) / sb.std[0];
        ss += d * d;
    }
    return std::sqrt(ss);
}

int default_exclusion(int window) noexcept { return (window + 1) / 2; }

DistanceProfile mass(std::span<const double> query, std::span<const double> series) {
    const std::size_t len = query.size();
    if (len < 2) fail(ErrorCode::DegenerateWindow, "z-normalization needs a window of at least 2");
    if (len > series.size()) fail(ErrorCode::WindowTooLarge, "query longer than series");
    const auto stats = sliding_stats(series, static_cast<int>(len));
    const auto qs = sliding_stats(query, static_cast<int>(len));
    const bool query_flat = qs.std[0] < kFlatStd;

    SlidingDot engine(series, len);
    auto scratch = engine.make_scratch();
    const auto z = normalized_query(query, qs.mean[0], qs.std[0]);
    std::vector<double> dots(stats.mean.size());
    engine.dot(z, scratch, dots);

    DistanceProfile out;
    out.distances.resize(dots.size());
    fill_profile(dots, query_flat, stats, len, out.distances);
    // sqrt of a cancelled d^2 loses precision near zero; close matches are rare, so recompute them
    for (std::size_t k = 0; k < out.distances.size(); ++k)
        if (out.distances[k] < 0.1) out.distances[k] = znorm_distance(query, series.subspan(k, len));
    return out;
}

MatrixProfile stamp(std::span<const double> series, int window, int exclusion, unsigned threads) {
    if (window < 2) fail(ErrorCode::DegenerateWindow, "z-normalization needs a window of at least 2");
    if (exclusion < 0) exclusion = default_exclusion(window);
    const std::size_t m = series.size();
    const auto w = static_cast<std::size_t>(window);
    const auto excl = static_cast<std::size_t>(exclusion);
    if (m < w + excl + 1) fail(ErrorCode::SeriesTooShort, "series too short for the window and exclusion zone");

    const std::size_t count = m - w + 1;
    const auto stats = sliding_stats(series, window);
    SlidingDot engine(series, w);

    MatrixProfile mp;
    mp.window = window;
    mp.exclusion = exclusion;
    mp.P.assign(count, kMaskedDistance);
    mp.I.assign(count, 0);

    auto run_block = [&](std::size_t begin, std::size_t end) {
        auto scratch = engine.make_scratch();
        std::vector<double> dots(count), profile(count);
        for (std::size_t j = begin; j < end; ++j) {
            const auto q = series.subspan(j, w);
            const bool query_flat = stats.std[j] < kFlatStd;
            const auto z = normalized_query(q, stats.mean[j], stats.std[j]);
            engine.dot(z, scratch, dots);
            fill_profile(dots, query_flat, stats, w, profile);
            const std::size_t lo = j > excl ? j - excl : 0;
            const std::size_t hi = std::min(count - 1, j + excl);
            for (std::size_t k = lo; k <= hi; ++k) profile[k] = kMaskedDistance;

            std::size_t best = count;
            double best_d = kMaskedDistance;
            for (std::size_t k = 0; k < count; ++k)
                if (profile[k] < best_d) {
                    best_d = profile[k];
                    best = k;
                }
            // the FFT route picks the neighbour; the reported distance is recomputed directly
            mp.I[j] = best;
            mp.P[j] = znorm_distance(q, series.subspan(best, w));
        }
    };

    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(count)));
    if (threads == 1) {
        run_block(0, count);
    } else {
        std::vector<std::jthread> pool;
        const std::size_t step = (count + threads - 1) / threads;
        for (std::size_t b = 0; b < count; b += step) pool.emplace_back(run_block, b, std::min(count, b + step));
    }
    return mp;
}

}  // namespace kneescout
