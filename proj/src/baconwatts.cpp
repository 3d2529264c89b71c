#include "kneescout/baconwatts.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kneescout/error.hpp"

namespace kneescout {

namespace {

constexpr double kLambdaCeiling = 1e16;

double sum_sq(std::span<const double> r) {
    double s = 0.0;
    for (double v : r) s += v * v;
    return s;
}

bool all_finite(std::span<const double> r) {
    return std::all_of(r.begin(), r.end(), [](double v) { return std::isfinite(v); });
}

double norm(std::span<const double> v) { return std::sqrt(sum_sq(v)); }

enum Slot { A0, A1, A2, A3, X0, X2, kSlots };

DbwParams unpack(std::span<const double> t, double gamma) {
    return {t[A0], t[A1], t[A2], t[A3], t[X0], t[X2], gamma};
}

}  // namespace

double dbw_model(double x, const DbwParams& p) {
    const double u = x - p.x0;
    const double v = x - p.x2;
    return p.alpha0 + p.alpha1 * u + p.alpha2 * u * std::tanh(u / p.gamma) + p.alpha3 * v * std::tanh(v / p.gamma);
}

std::vector<double> default_steps(std::span<const double> theta) {
    std::vector<double> h(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) h[i] = 6e-6 * std::max(std::abs(theta[i]), 1e-4);
    return h;
}

Eigen::MatrixXd central_jacobian(const ResidualFn& fn, std::size_t n_residuals, std::span<const double> theta,
                                 std::span<const double> steps) {
    const std::size_t k = theta.size();
    Eigen::MatrixXd jac(static_cast<Eigen::Index>(n_residuals), static_cast<Eigen::Index>(k));
    std::vector<double> probe(theta.begin(), theta.end());
    std::vector<double> plus(n_residuals), minus(n_residuals);
    for (std::size_t c = 0; c < k; ++c) {
        const double h = steps[c];
        probe[c] = theta[c] + h;
        fn(probe, plus);
        probe[c] = theta[c] - h;
        fn(probe, minus);
        probe[c] = theta[c];
        for (std::size_t r = 0; r < n_residuals; ++r)
            jac(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = (plus[r] - minus[r]) / (2.0 * h);
    }
    return jac;
}

LmResult lm_optimize(const ResidualFn& fn, std::size_t n_residuals, std::vector<double> init, const LmOptions& opts) {
    const std::size_t k = init.size();
    std::vector<double> r(n_residuals), trial_r(n_residuals);
    fn(init, r);
    if (!all_finite(r)) fail(ErrorCode::NonFiniteResidual, "residuals are not finite at the initial point");

    LmResult out;
    out.params = std::move(init);
    out.cost = sum_sq(r);
    out.accepted_costs.push_back(out.cost);
    out.status = LmStatus::MaxIterationsReached;
    double lambda = opts.lambda0;
    std::vector<double> trial(k);

    for (int iter = 0; iter < opts.max_iter; ++iter) {
        out.iterations = iter + 1;
        const auto jac = central_jacobian(fn, n_residuals, out.params, default_steps(out.params));
        const Eigen::Map<const Eigen::VectorXd> rv(r.data(), static_cast<Eigen::Index>(n_residuals));
        const Eigen::MatrixXd jtj = jac.transpose() * jac;
        const Eigen::VectorXd grad = jac.transpose() * rv;
        if (!jtj.allFinite() || !grad.allFinite())
            fail(ErrorCode::NonFiniteResidual, "Jacobian is not finite");
        if (grad.lpNorm<Eigen::Infinity>() == 0.0) {
            out.status = LmStatus::Converged;
            return out;
        }
        Eigen::VectorXd scale = jtj.diagonal();
        const double floor = std::max(scale.maxCoeff(), 1.0) * 1e-15;
        for (Eigen::Index i = 0; i < scale.size(); ++i) scale(i) = std::max(scale(i), floor);

        for (;;) {
            Eigen::MatrixXd damped = jtj;
            damped.diagonal() += lambda * scale;
            Eigen::LDLT<Eigen::MatrixXd> ldlt(damped);
            Eigen::VectorXd step = ldlt.solve(-grad);
            if (ldlt.info() != Eigen::Success || !step.allFinite()) {
                lambda *= 10.0;
                if (lambda > kLambdaCeiling) fail(ErrorCode::SingularNormalEquations, "damped normal equations are singular");
                continue;
            }
            for (std::size_t i = 0; i < k; ++i) trial[i] = out.params[i] + step(static_cast<Eigen::Index>(i));
            fn(trial, trial_r);
            const double trial_cost = all_finite(trial_r) ? sum_sq(trial_r) : std::numeric_limits<double>::infinity();
            if (trial_cost < out.cost) {
                const double decrease = out.cost - trial_cost;
                const double step_norm = step.norm();
                const double theta_norm = norm(out.params);
                out.params = trial;
                out.cost = trial_cost;
                out.accepted_costs.push_back(trial_cost);
                r.swap(trial_r);
                lambda = std::max(lambda / 10.0, 1e-300);
                if (step_norm <= opts.tol * (theta_norm + opts.tol) || decrease <= opts.tol * (trial_cost + opts.tol * opts.tol)) {
                    out.status = LmStatus::Converged;
                    return out;
                }
                break;
            }
            lambda *= 10.0;
            if (lambda > kLambdaCeiling) {
                // no damped step lowers the cost: a stationary point to working precision
                out.status = LmStatus::Converged;
                return out;
            }
        }
    }
    return out;
}

Cycle round_cycle(double x) noexcept { return static_cast<Cycle>(std::floor(x + 0.5)); }

BaconWattsFit fit_dbw(const CapacityFadeSeries& series, const DbwOptions& opts) {
    if (series.size() < 10) fail(ErrorCode::TooShort, "the double Bacon-Watts fit needs at least 10 points");
    if (!(opts.gamma > 0.0)) fail(ErrorCode::InvalidArgument, "gamma must be positive");
    validate(series);

    std::vector<double> x(series.cycles.begin(), series.cycles.end());
    const auto& y = series.capacity_ah;
    const double gamma = opts.gamma;
    const double span = x.back() - x.front();

    std::vector<double> theta(kSlots);
    theta[A0] = 1.0;
    theta[A1] = -1e-4;
    theta[A2] = -1e-4;
    theta[A3] = -1e-4;
    theta[X0] = x.front() + 0.7 * span;
    theta[X2] = x.front() + 0.9 * span;
    if (opts.swap_transition_init) std::swap(theta[X0], theta[X2]);

    ResidualFn residuals = [&](std::span<const double> t, std::span<double> out) {
        const DbwParams p = unpack(t, gamma);
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = dbw_model(x[i], p) - y[i];
    };

    LmOptions lm;
    lm.max_iter = opts.max_iter;
    const auto result = lm_optimize(residuals, x.size(), theta, lm);
    if (!all_finite(result.params)) fail(ErrorCode::FitDiverged, "fit produced non-finite parameters");

    BaconWattsFit fit;
    fit.params = unpack(result.params, gamma);
    fit.residual_norm = std::sqrt(result.cost);
    fit.iterations = result.iterations;
    fit.converged = result.status == LmStatus::Converged;
    return fit;
}

KneeReport identify_knees_dbw(const CapacityFadeSeries& series, const DbwOptions& opts, const PipelineParams& smoothing) {
    const auto fit = fit_dbw(series, opts);
    const auto& p = fit.params;
    const double first = static_cast<double>(series.cycles.front());
    const double last = static_cast<double>(series.cycles.back());

    // the transition terms minus their best straight line; near zero means the data carry no bend
    std::vector<double> bend(series.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(series.size());
    for (std::size_t i = 0; i < series.size(); ++i) {
        const double xi = static_cast<double>(series.cycles[i]);
        const double u = xi - p.x0, v = xi - p.x2;
        bend[i] = p.alpha2 * u * std::tanh(u / p.gamma) + p.alpha3 * v * std::tanh(v / p.gamma);
        sx += xi;
        sy += bend[i];
        sxx += xi * xi;
        sxy += xi * bend[i];
    }
    const double denom = n * sxx - sx * sx;
    const double slope = denom != 0.0 ? (n * sxy - sx * sy) / denom : 0.0;
    const double icept = (sy - slope * sx) / n;
    double bend_size = 0.0;
    for (std::size_t i = 0; i < series.size(); ++i)
        bend_size = std::max(bend_size, std::abs(bend[i] - icept - slope * static_cast<double>(series.cycles[i])));

    const double lo = std::min(p.x0, p.x2);
    const double hi = std::max(p.x0, p.x2);
    const bool outside = lo < first || hi > last;

    KneeReport report;
    report.cell_id = series.cell_id;
    report.method = Method::DoubleBaconWatts;
    report.onset_cycle = round_cycle(std::clamp(lo, first, last));
    report.knee_cycle = round_cycle(std::clamp(hi, first, last));
    if (report.knee_cycle <= report.onset_cycle) {
        // coincident transitions still yield an ordered pair
        if (report.knee_cycle < static_cast<Cycle>(last))
            report.knee_cycle = report.onset_cycle + 1;
        else
            report.onset_cycle = report.knee_cycle - 1;
    }
    report.eol_cycle = smoothed_eol(series, smoothing);
    report.params = {{"gamma", opts.gamma}, {"max_iter", opts.max_iter}};
    report.diagnostics = {
        {"alpha0", p.alpha0},
        {"alpha1", p.alpha1},
        {"alpha2", p.alpha2},
        {"alpha3", p.alpha3},
        {"x0", p.x0},
        {"x2", p.x2},
        {"residual_norm", fit.residual_norm},
        {"iterations", fit.iterations},
        {"converged", fit.converged ? 1.0 : 0.0},
        {"transition_out_of_range", outside ? 1.0 : 0.0},
        {"transitions_identifiable", bend_size > 1e-6 * std::abs(p.alpha0) ? 1.0 : 0.0},
    };
    return report;
}

}  // namespace kneescout
