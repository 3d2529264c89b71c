#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kneescout/earlypredict.hpp"
#include "kneescout/ingest.hpp"

namespace kneescout {

// Fade model on normalized capacity:
//   q(n) = 1 - a * n^(p/2) - b * K(n)
// K is zero before n_k, grows exponentially at rate c for knee_width cycles, then its
// acceleration decays at the same rate, so the steepest bend sits near n_k + knee_width.
struct SyntheticSpec {
    std::string cell_id = "synth";
    int n_cycles = 2000;
    double a = 5e-4;
    double b = 0.0;
    double c = 0.01;
    int n_k = 800;
    int knee_width = 0;  // 0 picks n_cycles / 6
    double p = 1.0;
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;
    double q_nom_ah = 1.1;
};

struct GroundTruth {
    Cycle onset_cycle = 0;
    Cycle knee_cycle = 0;
    static constexpr std::string_view kDefinition =
        "onset: first cycle at or after n_k where |second difference| of the noiseless trend exceeds 10x its median "
        "over cycles before n_k; knee: cycle of minimum second difference before truncation";
};

struct SyntheticCurve {
    CapacityFadeSeries series;
    std::optional<GroundTruth> truth;
    std::vector<double> trend;  // noiseless normalized capacity on series.cycles
    SyntheticSpec spec;
};

void validate(const SyntheticSpec& spec);
int effective_knee_width(const SyntheticSpec& spec) noexcept;

double knee_term(double n, double n_k, double c, double width) noexcept;
double noiseless_trend(const SyntheticSpec& spec, double n) noexcept;

std::optional<GroundTruth> ground_truth(const std::vector<Cycle>& cycles, const std::vector<double>& trend, int n_k);

SyntheticCurve generate(const SyntheticSpec& spec);

// b such that the noiseless trend reaches `target` at cycle `at`; nullopt if impossible.
std::optional<double> amplitude_for(const SyntheticSpec& spec, double at, double target);

std::vector<SyntheticCurve> generate_convex_family(int count, std::uint64_t seed, double noise_sigma = 0.0);
std::vector<SyntheticCurve> generate_knee_family(int count, std::uint64_t seed, double noise_sigma = 0.0,
                                                 int n_cycles = 2000);

// Knees tied to EoL: knee ~ slope * eol + intercept + N(0, jitter).
struct EolLinkedFleet {
    std::vector<SyntheticCurve> curves;
    std::vector<double> target_eol;
    std::vector<double> target_knee;
};
EolLinkedFleet generate_eol_linked_fleet(int count, std::uint64_t seed, double jitter = 15.0);

// Early-cycle discharge curves whose drift rate sets the knee-onset label.
std::vector<FleetCell> simulate_fleet(int count, std::uint64_t seed, int last_cycle = 40);

std::string truth_to_json(const SyntheticCurve& curve);

}  // namespace kneescout
