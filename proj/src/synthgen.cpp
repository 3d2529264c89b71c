#include "kneescout/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <json.hpp>

#include "kneescout/error.hpp"

namespace kneescout {

namespace {

constexpr double kTruncateAt = 0.6;

double uniform(std::mt19937_64& rng, double lo, double hi) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
}

// Box-Muller on our own uniform keeps streams identical across standard libraries.
class Gaussian {
public:
    explicit Gaussian(std::uint64_t seed) : rng_(seed) {}
    double operator()() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 <= 0.0) u1 = uniform(rng_, 0.0, 1.0);
        const double u2 = uniform(rng_, 0.0, 1.0);
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * M_PI * u2);
        has_spare_ = true;
        return r * std::cos(2.0 * M_PI * u2);
    }

private:
    std::mt19937_64 rng_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

double median_of(std::vector<double> v) {
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    if (v.size() % 2 == 1) return *mid;
    const double upper = *mid;
    const double lower = *std::max_element(v.begin(), mid);
    return 0.5 * (lower + upper);
}

// Median |second difference| of the early-fade term alone before n_k.
double early_curvature_median(const SyntheticSpec& s) {
    std::vector<double> d2;
    const double e = 0.5 * s.p;
    for (int n = 2; n < std::max(s.n_k, 5); ++n) {
        const double fm = std::pow(n - 1.0, e), f0 = std::pow(static_cast<double>(n), e), fp = std::pow(n + 1.0, e);
        d2.push_back(std::abs(s.a * (fm + fp - 2.0 * f0)));
    }
    return median_of(std::move(d2));
}

// Jump in the trend's second derivative at n_k.
double knee_jump(const SyntheticSpec& s) { return s.b * s.c * s.c; }

}  // namespace

void validate(const SyntheticSpec& s) {
    if (s.n_cycles < 3) fail(ErrorCode::InvalidSpec, "n_cycles must be at least 3");
    if (s.a < 0.0 || s.b < 0.0 || s.c < 0.0) fail(ErrorCode::InvalidSpec, "a, b and c must be nonnegative");
    if (!(s.p > 0.0 && s.p <= 1.0)) fail(ErrorCode::InvalidSpec, "p must lie in (0,1]");
    if (s.n_k < 0 || s.n_k >= s.n_cycles) fail(ErrorCode::InvalidSpec, "n_k must lie in [0, n_cycles)");
    if (s.knee_width < 0) fail(ErrorCode::InvalidSpec, "knee_width must be nonnegative");
    if (!(s.noise_sigma >= 0.0)) fail(ErrorCode::InvalidSpec, "noise_sigma must be nonnegative");
    if (!(s.q_nom_ah > 0.0)) fail(ErrorCode::InvalidSpec, "q_nom_ah must be positive");
}

int effective_knee_width(const SyntheticSpec& s) noexcept {
    return s.knee_width > 0 ? s.knee_width : std::max(1, s.n_cycles / 6);
}

double knee_term(double n, double n_k, double c, double width) noexcept {
    const double x = n - n_k;
    if (x <= 0.0 || c == 0.0) return 0.0;
    if (x <= width) return std::expm1(c * x) - c * x;
    const double u = x - width;
    const double grown = std::exp(c * width);
    const double value_w = grown - 1.0 - c * width;
    const double slope_w = c * (grown - 1.0);
    return value_w + slope_w * u + grown * (c * u + std::expm1(-c * u));
}

double noiseless_trend(const SyntheticSpec& s, double n) noexcept {
    return 1.0 - s.a * std::pow(n, 0.5 * s.p) -
           s.b * knee_term(n, s.n_k, s.c, static_cast<double>(effective_knee_width(s)));
}

std::optional<GroundTruth> ground_truth(const std::vector<Cycle>& cycles, const std::vector<double>& trend, int n_k) {
    const std::size_t n = trend.size();
    if (n < 5) return std::nullopt;
    std::vector<double> d2(n, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) d2[i] = trend[i - 1] + trend[i + 1] - 2.0 * trend[i];

    std::vector<double> early;
    for (std::size_t i = 1; i + 1 < n; ++i)
        if (cycles[i] < n_k) early.push_back(std::abs(d2[i]));
    if (early.size() < 3)
        for (std::size_t i = 1; i + 1 < n && early.size() < 3; ++i) early.push_back(std::abs(d2[i]));
    const double threshold = 10.0 * median_of(std::move(early));

    std::optional<std::size_t> onset;
    for (std::size_t i = 1; i + 1 < n; ++i)
        if (cycles[i] >= n_k && std::abs(d2[i]) > threshold) {
            onset = i;
            break;
        }
    std::size_t knee = 1;
    for (std::size_t i = 2; i + 1 < n; ++i)
        if (d2[i] < d2[knee]) knee = i;
    if (!onset || *onset >= knee) return std::nullopt;
    return GroundTruth{cycles[*onset], cycles[knee]};
}

SyntheticCurve generate(const SyntheticSpec& spec) {
    validate(spec);
    SyntheticCurve out;
    out.spec = spec;
    out.series.cell_id = spec.cell_id;
    out.series.q_nom_ah = spec.q_nom_ah;
    for (int n = 1; n <= spec.n_cycles; ++n) {
        const double q = noiseless_trend(spec, n);
        if (q <= kTruncateAt) break;
        out.series.cycles.push_back(n);
        out.trend.push_back(q);
    }
    if (out.trend.size() < 3) fail(ErrorCode::InvalidSpec, "curve truncates before 3 cycles");

    Gaussian noise(spec.seed);
    out.series.capacity_ah.reserve(out.trend.size());
    for (double q : out.trend) {
        const double noisy = spec.noise_sigma > 0.0 ? q + spec.noise_sigma * noise() : q;
        out.series.capacity_ah.push_back(std::max(noisy, 1e-6) * spec.q_nom_ah);
    }
    if (spec.b > 0.0 && spec.c > 0.0) out.truth = ground_truth(out.series.cycles, out.trend, spec.n_k);
    return out;
}

std::optional<double> amplitude_for(const SyntheticSpec& spec, double at, double target) {
    const double k = knee_term(at, spec.n_k, spec.c, static_cast<double>(effective_knee_width(spec)));
    const double room = 1.0 - target - spec.a * std::pow(at, 0.5 * spec.p);
    if (!(k > 0.0) || !(room > 0.0)) return std::nullopt;
    return room / k;
}

namespace {

struct FamilyRanges {
    double p_lo, p_hi;
    double early_lo, early_hi;  // early fade reached at n_k
    double tail_lo, tail_hi;    // cycles from the knee to q = 0.6, as a fraction of n
};

std::vector<SyntheticCurve> draw_family(int count, std::uint64_t seed, double noise_sigma, int n_cycles,
                                        const FamilyRanges& r, std::string_view prefix) {
    if (count < 1) fail(ErrorCode::InvalidArgument, "family size must be at least 1");
    std::mt19937_64 rng(seed);
    std::vector<SyntheticCurve> out;
    const double n = n_cycles;
    while (static_cast<int>(out.size()) < count) {
        SyntheticSpec s;
        s.n_cycles = n_cycles;
        s.p = uniform(rng, r.p_lo, r.p_hi);
        s.n_k = static_cast<int>(uniform(rng, 0.30, 0.50) * n);
        s.a = uniform(rng, r.early_lo, r.early_hi) / std::pow(static_cast<double>(s.n_k), 0.5 * s.p);
        s.c = uniform(rng, 0.006, 0.015);
        s.knee_width = static_cast<int>(uniform(rng, 0.12, 0.22) * n);
        const double end = s.n_k + s.knee_width + uniform(rng, r.tail_lo, r.tail_hi) * n;
        s.noise_sigma = noise_sigma;
        s.seed = rng();
        const auto b = amplitude_for(s, end, kTruncateAt);
        if (!b) continue;
        s.b = *b;
        // knee acceleration must stand well clear of the early-fade curvature
        if (knee_jump(s) < 20.0 * early_curvature_median(s)) continue;
        s.cell_id = std::string(prefix) + std::to_string(out.size());
        auto curve = generate(s);
        if (!curve.truth) continue;
        out.push_back(std::move(curve));
    }
    return out;
}

}  // namespace

std::vector<SyntheticCurve> generate_knee_family(int count, std::uint64_t seed, double noise_sigma, int n_cycles) {
    return draw_family(count, seed, noise_sigma, n_cycles, {1.0, 1.0, 0.01, 0.03, 0.05, 0.15}, "knee_");
}

std::vector<SyntheticCurve> generate_convex_family(int count, std::uint64_t seed, double noise_sigma) {
    return draw_family(count, seed, noise_sigma, 2000, {0.4, 0.7, 0.05, 0.10, 0.05, 0.15}, "convex_");
}

EolLinkedFleet generate_eol_linked_fleet(int count, std::uint64_t seed, double jitter) {
    if (count < 1) fail(ErrorCode::InvalidArgument, "fleet size must be at least 1");
    std::mt19937_64 rng(seed);
    Gaussian gauss(rng());
    EolLinkedFleet fleet;
    while (static_cast<int>(fleet.curves.size()) < count) {
        const double eol = uniform(rng, 800.0, 1400.0);
        const double knee = 0.85 * eol + jitter * gauss();
        SyntheticSpec s;
        s.knee_width = static_cast<int>(uniform(rng, 150.0, 250.0));
        s.n_k = static_cast<int>(knee) - s.knee_width;
        s.n_cycles = static_cast<int>(1.3 * eol);
        s.p = 1.0;
        s.a = uniform(rng, 0.01, 0.03) / std::sqrt(static_cast<double>(s.n_k));
        s.c = uniform(rng, 0.006, 0.012);
        s.seed = rng();
        if (s.n_k < 50) continue;
        const auto b = amplitude_for(s, eol, 0.8);
        if (!b) continue;
        s.b = *b;
        if (knee_jump(s) < 20.0 * early_curvature_median(s)) continue;
        s.cell_id = "fleet_" + std::to_string(fleet.curves.size());
        auto curve = generate(s);
        if (!curve.truth) continue;
        fleet.curves.push_back(std::move(curve));
        fleet.target_eol.push_back(eol);
        fleet.target_knee.push_back(knee);
    }
    return fleet;
}

std::vector<FleetCell> simulate_fleet(int count, std::uint64_t seed, int last_cycle) {
    if (count < 1) fail(ErrorCode::InvalidArgument, "fleet size must be at least 1");
    if (last_cycle < 11) fail(ErrorCode::InvalidArgument, "fleet needs cycles through at least 11");
    std::mt19937_64 rng(seed);
    Gaussian gauss(rng());

    constexpr double v_top = 3.6, v_bottom = 2.0, v_step = 0.01;
    constexpr double drift_per_cycle = 2e-4;   // V per cycle per unit rate
    constexpr double drift_noise = 1e-3;       // V, independent per cycle
    constexpr double fade_per_cycle = 5e-5;    // fraction per cycle per unit rate
    constexpr double capacity_noise = 5e-4;    // Ah
    const auto logistic = [](double v, double mid) { return 1.0 / (1.0 + std::exp((v - mid) / 0.06)); };

    std::vector<FleetCell> fleet;
    for (int i = 0; i < count; ++i) {
        const double rate = std::exp(uniform(rng, std::log(0.4), std::log(2.5)));
        const double q0 = uniform(rng, 1.05, 1.10);
        FleetCell cell;
        cell.cell_id = "cell_" + std::to_string(i);
        cell.onset_cycle = std::round(200.0 * std::pow(rate, -0.9) * std::exp(0.05 * gauss()));
        for (int k = 1; k <= last_cycle; ++k) {
            const double mid = 3.25 - drift_per_cycle * rate * k - drift_noise * gauss();
            const double qmax = q0 * (1.0 - fade_per_cycle * rate * k) + capacity_noise * gauss();
            const double lo = logistic(v_top, mid), hi = logistic(v_bottom, mid);
            CycleRecord rec;
            rec.cycle = k;
            const int steps = static_cast<int>(std::lround((v_top - v_bottom) / v_step));
            for (int s = 0; s <= steps; ++s) {
                const double v = v_top - v_step * s;
                rec.voltage_v.push_back(v);
                rec.q_ah.push_back(qmax * (logistic(v, mid) - lo) / (hi - lo));
            }
            cell.records.push_back(std::move(rec));
        }
        fleet.push_back(std::move(cell));
    }
    return fleet;
}

std::string truth_to_json(const SyntheticCurve& curve) {
    nlohmann::ordered_json j;
    j["cell_id"] = curve.series.cell_id;
    if (curve.truth) {
        j["onset_cycle"] = curve.truth->onset_cycle;
        j["knee_cycle"] = curve.truth->knee_cycle;
    } else {
        j["onset_cycle"] = nullptr;
        j["knee_cycle"] = nullptr;
    }
    j["definition"] = GroundTruth::kDefinition;
    const auto& s = curve.spec;
    j["spec"] = {{"n_cycles", s.n_cycles}, {"a", s.a},         {"b", s.b},
                 {"c", s.c},               {"n_k", s.n_k},     {"knee_width", effective_knee_width(s)},
                 {"p", s.p},               {"noise_sigma", s.noise_sigma}, {"seed", s.seed}};
    return j.dump(2) + "\n";
}

}  // namespace kneescout
