#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kneescout/baconwatts.hpp"
#include "kneescout/segmentation.hpp"

namespace kneescout {

double pearson(std::span<const double> x, std::span<const double> y);

// Relative change with the benchmark in the denominator, in percent.
double improvement_percent(double r_new, double r_old);

struct BatchRow {
    std::string cell_id;
    Method method = Method::CurvatureRea;
    Cycle onset_cycle = 0;
    Cycle knee_cycle = 0;
    std::optional<Cycle> eol_cycle;
    Cycle gap = 0;
    bool knee_evidence_weak = false;
};

struct CorrelationReport {
    Method method = Method::CurvatureRea;
    std::optional<double> r_onset_eol;
    std::optional<double> r_knee_eol;
    std::size_t n_cells = 0;      // rows with a defined EoL
    std::size_t n_excluded = 0;   // rows without one
    double mean_gap = 0.0;
    std::string problem;          // why a coefficient is undefined, if it is
};

struct BatchResult {
    std::vector<BatchRow> rows;  // sorted by cell_id, then method
    std::vector<CorrelationReport> correlations;
    std::optional<double> improvement_onset_pct;
    std::optional<double> improvement_knee_pct;
};

struct BatchOptions {
    std::vector<Method> methods{Method::CurvatureRea, Method::DoubleBaconWatts};
    PipelineParams pipeline;
    DbwOptions dbw;
    unsigned jobs = 1;
};

BatchResult batch_report(const std::vector<CapacityFadeSeries>& cells, const BatchOptions& options = {});

std::string batch_csv(const BatchResult& result);
void write_scatter_files(const std::filesystem::path& dir, const BatchResult& result);

std::string knee_report_json(const KneeReport& report);

}  // namespace kneescout
