#include "kneescout/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <span>

#include <Eigen/Dense>

#include "kneescout/error.hpp"

namespace kneescout {

namespace {

// Least-squares polynomial coefficients over t = 0..len-1, lowest power first.
std::vector<double> edge_polynomial(std::span<const double> values, int order) {
    const auto len = static_cast<Eigen::Index>(values.size());
    Eigen::MatrixXd vander(len, order + 1);
    Eigen::VectorXd rhs(len);
    for (Eigen::Index r = 0; r < len; ++r) {
        double p = 1.0;
        for (int c = 0; c <= order; ++c) {
            vander(r, c) = p;
            p *= static_cast<double>(r);
        }
        rhs(r) = values[static_cast<std::size_t>(r)];
    }
    const Eigen::VectorXd coef = vander.colPivHouseholderQr().solve(rhs);
    return {coef.data(), coef.data() + coef.size()};
}

double eval_poly(const std::vector<double>& coef, double t) {
    double acc = 0.0;
    for (auto c = coef.rbegin(); c != coef.rend(); ++c) acc = acc * t + *c;
    return acc;
}

}  // namespace

std::vector<double> savgol_coefficients(int window, int order) {
    if (window % 2 == 0) fail(ErrorCode::EvenWindow, "smoothing window must be odd");
    if (window < 1) fail(ErrorCode::InvalidArgument, "smoothing window must be positive");
    if (order < 0 || order >= window) fail(ErrorCode::OrderTooHigh, "polynomial order must be below the window");
    const int half = (window - 1) / 2;
    Eigen::MatrixXd vander(window, order + 1);
    for (int r = 0; r < window; ++r) {
        const double t = static_cast<double>(r - half);
        double p = 1.0;
        for (int c = 0; c <= order; ++c) {
            vander(r, c) = p;
            p *= t;
        }
    }
    // Row 0 of the pseudo-inverse evaluates the fitted polynomial at t = 0.
    Eigen::MatrixXd pinv = vander.colPivHouseholderQr().solve(Eigen::MatrixXd::Identity(window, window));
    std::vector<double> w(static_cast<std::size_t>(window));
    for (int r = 0; r < window; ++r) w[static_cast<std::size_t>(r)] = pinv(0, r);
    return w;
}

SmoothedSeries savgol_smooth(const NormalizedSeries& series, int window, int order) {
    const std::size_t n = series.values.size();
    if (window % 2 == 0) fail(ErrorCode::EvenWindow, "smoothing window must be odd");
    if (window < 3) fail(ErrorCode::InvalidArgument, "smoothing window must be at least 3");
    if (static_cast<std::size_t>(window) > n) fail(ErrorCode::WindowTooLarge, "smoothing window exceeds series length");
    const auto weights = savgol_coefficients(window, order);
    const auto half = static_cast<std::ptrdiff_t>((window - 1) / 2);
    // Pad each end with the least-squares polynomial of the edge window, so polynomials up to
    // `order` come back unchanged there too. A plain reflection would kink straight lines.
    std::vector<double> padded(n + 2 * static_cast<std::size_t>(half));
    std::copy(series.values.begin(), series.values.end(), padded.begin() + half);
    const std::span<const double> all(series.values);
    const auto w = static_cast<std::size_t>(window);
    const auto head = edge_polynomial(all.first(w), order);
    const auto tail = edge_polynomial(all.last(w), order);
    for (std::ptrdiff_t k = 1; k <= half; ++k) {
        padded[static_cast<std::size_t>(half - k)] = eval_poly(head, static_cast<double>(-k));
        padded[n + static_cast<std::size_t>(half + k - 1)] = eval_poly(tail, static_cast<double>(window - 1 + k));
    }

    SmoothedSeries out;
    out.cycles = series.cycles;
    out.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t k = 0; k < w; ++k) acc += weights[k] * padded[i + k];
        out.values[i] = acc;
    }
    return out;
}

SmoothingWindow clip_smoothing(std::size_t n, int window, int order) {
    int largest_odd = static_cast<int>(std::min<std::size_t>(n, 1u << 30));
    if (largest_odd % 2 == 0) --largest_odd;
    const int w = std::min(window, largest_odd);
    return {w, std::min(order, w - 1)};
}

CurvatureSeries approximate_curvature(const SmoothedSeries& series, int ws) {
    if (ws % 2 == 0) fail(ErrorCode::EvenWindow, "curvature window must be odd");
    if (ws < 3) fail(ErrorCode::InvalidArgument, "curvature window must be at least 3");
    const std::size_t n = series.values.size();
    if (n < static_cast<std::size_t>(ws)) fail(ErrorCode::SeriesTooShort, "series shorter than the curvature window");
    const std::size_t h = static_cast<std::size_t>((ws - 1) / 2);

    CurvatureSeries out;
    out.ws = ws;
    out.first_cycle = (series.cycles.empty() ? 0 : series.cycles.front()) + static_cast<Cycle>(h);
    out.values.resize(n - 2 * h);
    const auto& y = series.values;
    for (std::size_t k = 0; k < out.values.size(); ++k) out.values[k] = y[k] + y[k + 2 * h] - 2.0 * y[k + h];
    return out;
}

}  // namespace kneescout
