#include "kneescout/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kneescout/error.hpp"
#include "kneescout/matrixprofile.hpp"
#include "kneescout/preprocess.hpp"

namespace kneescout {

std::string_view to_string(Method m) noexcept {
    return m == Method::CurvatureRea ? "curvature_rea" : "double_bacon_watts";
}

std::optional<Method> parse_method(std::string_view s) noexcept {
    if (s == "curvature" || s == "curvature_rea") return Method::CurvatureRea;
    if (s == "baconwatts" || s == "double_bacon_watts") return Method::DoubleBaconWatts;
    return std::nullopt;
}

std::vector<std::size_t> arc_curve(std::span<const std::size_t> index) {
    const std::size_t n = index.size();
    if (n < 2) fail(ErrorCode::IndexOutOfRange, "arc curve needs an index of length at least 2");
    std::vector<long long> mark(n + 1, 0);
    for (std::size_t j = 0; j < n; ++j) {
        if (index[j] >= n) fail(ErrorCode::IndexOutOfRange, "index entry outside the profile");
        const std::size_t lo = std::min(j, index[j]);
        const std::size_t hi = std::max(j, index[j]);
        if (hi > lo + 1) {
            ++mark[lo + 1];
            --mark[hi];
        }
    }
    std::vector<std::size_t> ac(n);
    long long running = 0;
    for (std::size_t i = 0; i < n; ++i) {
        running += mark[i];
        ac[i] = static_cast<std::size_t>(running);
    }
    return ac;
}

std::vector<double> iac(std::size_t n) {
    if (n < 2) fail(ErrorCode::InvalidArgument, "ideal arc curve needs n >= 2");
    std::vector<double> out(n);
    const double len = static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = static_cast<double>(i);
        out[i] = 2.0 * x * (len - x) / len;
    }
    return out;
}

std::vector<double> cac(std::span<const std::size_t> ac, std::span<const double> iac) {
    if (ac.size() != iac.size()) fail(ErrorCode::LengthMismatch, "arc curve and ideal curve lengths differ");
    std::vector<double> out(ac.size());
    for (std::size_t i = 0; i < ac.size(); ++i)
        out[i] = iac[i] > 0.0 ? std::min(static_cast<double>(ac[i]) / iac[i], 1.0) : 1.0;
    return out;
}

void mask_edges(std::vector<double>& cac, std::size_t zone) {
    const std::size_t n = cac.size();
    if (n == 0) return;
    cac.front() = 1.0;
    cac.back() = 1.0;
    for (std::size_t i = 0; i < std::min(zone, n); ++i) {
        cac[i] = 1.0;
        cac[n - 1 - i] = 1.0;
    }
}

ArcCurveSet fluss(std::span<const std::size_t> index, std::size_t edge_zone) {
    ArcCurveSet set;
    set.ac = arc_curve(index);
    set.iac = iac(index.size());
    set.cac = cac(set.ac, set.iac);
    mask_edges(set.cac, edge_zone);
    return set;
}

RegimeBoundaries rea(std::span<const double> cac, int n_boundaries, int exclusion_radius) {
    if (n_boundaries < 0) fail(ErrorCode::InvalidArgument, "boundary count must be nonnegative");
    if (exclusion_radius < 0) fail(ErrorCode::InvalidArgument, "exclusion radius must be nonnegative");
    RegimeBoundaries out;
    out.exclusion_radius = exclusion_radius;
    std::vector<double> work(cac.begin(), cac.end());
    const double masked = std::numeric_limits<double>::infinity();
    const auto r = static_cast<std::size_t>(exclusion_radius);
    for (int b = 0; b < n_boundaries; ++b) {
        std::size_t best = work.size();
        double best_v = masked;
        for (std::size_t i = 0; i < work.size(); ++i)
            if (work[i] < best_v) {
                best_v = work[i];
                best = i;
            }
        if (best == work.size())
            fail(ErrorCode::InsufficientUnmaskedRegion,
                 "only " + std::to_string(b) + " of " + std::to_string(n_boundaries) + " boundaries fit");
        out.boundaries.push_back(best);
        const std::size_t lo = best > r ? best - r : 0;
        const std::size_t hi = std::min(work.size() - 1, best + r);
        for (std::size_t i = lo; i <= hi; ++i) work[i] = masked;
    }
    std::sort(out.boundaries.begin(), out.boundaries.end());
    return out;
}

int default_edge_zone(int mp_window, std::size_t n) {
    return static_cast<int>(std::min<std::size_t>(5 * static_cast<std::size_t>(mp_window), n / 4));
}

int default_rea_exclusion(int mp_window) noexcept { return 5 * mp_window; }

std::optional<Cycle> smoothed_eol(const CapacityFadeSeries& series, const PipelineParams& params) {
    const auto norm = normalize(resample_even(series));
    const auto sw = clip_smoothing(norm.size(), params.sg_window, params.sg_order);
    const auto smooth = savgol_smooth(norm, sw.window, sw.order);
    return find_eol(NormalizedSeries{smooth.cycles, smooth.values}, params.eol_threshold);
}

KneeReport identify_knees(const CapacityFadeSeries& series, const PipelineParams& params) {
    validate(series);
    const auto even = resample_even(series);
    const auto norm = normalize(even);
    const auto sw = clip_smoothing(norm.size(), params.sg_window, params.sg_order);
    const auto smooth = savgol_smooth(norm, sw.window, sw.order);
    const auto curv = approximate_curvature(smooth, params.curv_window);

    const int window = params.cac_window.value_or(params.mp_window);
    const auto mp = stamp(curv.values, window, default_exclusion(window), params.threads);
    const std::size_t n = mp.size();
    const auto arcs = fluss(mp.I, static_cast<std::size_t>(default_edge_zone(params.mp_window, n)));
    const int exclusion = params.exclusion_radius.value_or(default_rea_exclusion(params.mp_window));
    const auto regimes = rea(arcs.cac, 2, exclusion);

    const Cycle offset = curv.first_cycle + (window - 1) / 2;
    KneeReport report;
    report.cell_id = series.cell_id;
    report.method = Method::CurvatureRea;
    report.onset_cycle = offset + static_cast<Cycle>(regimes.boundaries[0]);
    report.knee_cycle = offset + static_cast<Cycle>(regimes.boundaries[1]);
    report.eol_cycle = find_eol(NormalizedSeries{smooth.cycles, smooth.values}, params.eol_threshold);

    report.params = {
        {"sg_window", sw.window},         {"sg_order", sw.order},   {"curv_window", params.curv_window},
        {"mp_window", params.mp_window},  {"exclusion_radius", exclusion},
    };
    if (params.cac_window) report.params["cac_window"] = *params.cac_window;

    std::vector<double> sorted = arcs.cac;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(n / 2), sorted.end());
    const double median = sorted[n / 2];
    const double cac_onset = arcs.cac[regimes.boundaries[0]];
    const double cac_knee = arcs.cac[regimes.boundaries[1]];
    const auto [cmin, cmax] = std::minmax_element(curv.values.begin(), curv.values.end());
    const double contrast = median > 0.0 ? std::min(cac_onset, cac_knee) / median : 1.0;

    report.diagnostics = {
        {"cac_min_onset", cac_onset},
        {"cac_min_knee", cac_knee},
        {"cac_median", median},
        {"cac_min_to_median", contrast},
        {"curvature_range", *cmax - *cmin},
        {"boundary_offset", static_cast<double>(offset)},
        {"knee_evidence_weak", (contrast > 0.5 || *cmax - *cmin < kFlatStd) ? 1.0 : 0.0},
    };
    return report;
}

}  // namespace kneescout
