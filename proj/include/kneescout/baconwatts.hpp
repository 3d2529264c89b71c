#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "kneescout/ingest.hpp"
#include "kneescout/segmentation.hpp"

namespace kneescout {

struct DbwParams {
    double alpha0 = 1.0;
    double alpha1 = -1e-4;
    double alpha2 = -1e-4;
    double alpha3 = -1e-4;
    double x0 = 0.0;
    double x2 = 0.0;
    double gamma = 10.0;
};

double dbw_model(double x, const DbwParams& p);

// residuals(theta, out): out has the size passed to lm_optimize
using ResidualFn = std::function<void(std::span<const double>, std::span<double>)>;

struct LmOptions {
    double tol = 1e-10;
    int max_iter = 1000;
    double lambda0 = 1e-3;
};

enum class LmStatus { Converged, MaxIterationsReached };

struct LmResult {
    std::vector<double> params;
    double cost = 0.0;  // sum of squared residuals
    int iterations = 0;
    LmStatus status = LmStatus::Converged;
    std::vector<double> accepted_costs;  // cost after each accepted step, starting with the initial cost
};

Eigen::MatrixXd central_jacobian(const ResidualFn& fn, std::size_t n_residuals, std::span<const double> theta,
                                 std::span<const double> steps);
std::vector<double> default_steps(std::span<const double> theta);

LmResult lm_optimize(const ResidualFn& fn, std::size_t n_residuals, std::vector<double> init, const LmOptions& opts = {});

struct BaconWattsFit {
    DbwParams params;
    double residual_norm = 0.0;
    int iterations = 0;
    bool converged = false;
};

struct DbwOptions {
    double gamma = 10.0;
    int max_iter = 1000;
    bool swap_transition_init = false;
};

BaconWattsFit fit_dbw(const CapacityFadeSeries& series, const DbwOptions& opts = {});

// Nearest integer, halves go to the later cycle.
Cycle round_cycle(double x) noexcept;

// Fits the model and packages the transitions as a report; EoL comes from the smoothed series.
KneeReport identify_knees_dbw(const CapacityFadeSeries& series, const DbwOptions& opts = {},
                              const PipelineParams& smoothing = {});

}  // namespace kneescout
