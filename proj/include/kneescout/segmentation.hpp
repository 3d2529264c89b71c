#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kneescout/ingest.hpp"

namespace kneescout {

struct ArcCurveSet {
    std::vector<std::size_t> ac;
    std::vector<double> iac;
    std::vector<double> cac;
};

struct RegimeBoundaries {
    std::vector<std::size_t> boundaries;  // ascending positions
    int exclusion_radius = 0;
};

enum class Method { CurvatureRea, DoubleBaconWatts };

std::string_view to_string(Method m) noexcept;
std::optional<Method> parse_method(std::string_view s) noexcept;

struct KneeReport {
    std::string cell_id;
    Method method = Method::CurvatureRea;
    Cycle onset_cycle = 0;
    Cycle knee_cycle = 0;
    std::optional<Cycle> eol_cycle;
    std::map<std::string, double> params;
    std::map<std::string, double> diagnostics;
};

struct PipelineParams {
    int sg_window = 21;
    int sg_order = 3;
    int curv_window = 3;
    int mp_window = 3;
    std::optional<int> cac_window;        // when set, segmentation uses a second profile with this window
    std::optional<int> exclusion_radius;  // unset: default_rea_exclusion
    double eol_threshold = 0.8;
    unsigned threads = 1;
};

std::vector<std::size_t> arc_curve(std::span<const std::size_t> index);
std::vector<double> iac(std::size_t n);
std::vector<double> cac(std::span<const std::size_t> ac, std::span<const double> iac);

// Positions within `zone` of either end can never be crossed by enough arcs to be meaningful.
void mask_edges(std::vector<double>& cac, std::size_t zone);

ArcCurveSet fluss(std::span<const std::size_t> index, std::size_t edge_zone);

RegimeBoundaries rea(std::span<const double> cac, int n_boundaries, int exclusion_radius);

int default_edge_zone(int mp_window, std::size_t n);
int default_rea_exclusion(int mp_window) noexcept;

KneeReport identify_knees(const CapacityFadeSeries& series, const PipelineParams& params = {});

// EoL on the resampled, normalized and smoothed series.
std::optional<Cycle> smoothed_eol(const CapacityFadeSeries& series, const PipelineParams& params = {});

}  // namespace kneescout
