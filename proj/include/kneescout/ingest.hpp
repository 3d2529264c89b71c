#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace kneescout {

using Cycle = std::int64_t;

struct CapacityFadeSeries {
    std::string cell_id;
    std::vector<Cycle> cycles;
    std::vector<double> capacity_ah;
    double q_nom_ah = 0.0;

    std::size_t size() const noexcept { return cycles.size(); }
};

// Dimensionless capacity on a unit-spaced cycle grid.
struct NormalizedSeries {
    std::vector<Cycle> cycles;
    std::vector<double> values;

    std::size_t size() const noexcept { return cycles.size(); }
};

// Checks the CapacityFadeSeries invariants and throws on the first violation.
void validate(const CapacityFadeSeries& series);

struct LoadOverrides {
    std::optional<std::string> cell_id;
    std::optional<double> q_nom_ah;
};

// Metadata lives in `<basename>.meta.json` next to the CSV; overrides win.
CapacityFadeSeries load_capacity_csv(const std::filesystem::path& path, const LoadOverrides& overrides = {});
CapacityFadeSeries parse_capacity_csv(std::string_view text, std::string cell_id, double q_nom_ah);

void write_capacity_csv(const std::filesystem::path& path, const CapacityFadeSeries& series);
void write_metadata(const std::filesystem::path& path, const CapacityFadeSeries& series);
std::filesystem::path metadata_path(const std::filesystem::path& csv_path);

// Interpolating spline with zero second derivative at both ends.
class NaturalCubicSpline {
public:
    NaturalCubicSpline(std::span<const double> x, std::span<const double> y);
    double operator()(double x) const;

private:
    std::vector<double> x_;
    std::vector<double> y_;
    std::vector<double> second_;  // second derivatives at the knots
};

bool is_unit_spaced(std::span<const Cycle> cycles) noexcept;
CapacityFadeSeries resample_even(const CapacityFadeSeries& series);
NormalizedSeries normalize(const CapacityFadeSeries& series);

std::optional<Cycle> find_eol(const NormalizedSeries& series, double threshold = 0.8);

}  // namespace kneescout
