#pragma once

#include <vector>

#include "kneescout/ingest.hpp"

namespace kneescout {

struct SmoothedSeries {
    std::vector<Cycle> cycles;
    std::vector<double> values;

    std::size_t size() const noexcept { return values.size(); }
};

struct CurvatureSeries {
    std::vector<double> values;
    Cycle first_cycle = 0;  // cycle of values[0]
    int ws = 3;
};

// Center weights of a least-squares polynomial fit over a centered window.
std::vector<double> savgol_coefficients(int window, int order);

SmoothedSeries savgol_smooth(const NormalizedSeries& series, int window = 21, int order = 3);

// Window clipped to the largest odd value <= n and order clipped below it.
struct SmoothingWindow {
    int window;
    int order;
};
SmoothingWindow clip_smoothing(std::size_t n, int window, int order);

CurvatureSeries approximate_curvature(const SmoothedSeries& series, int ws = 3);

}  // namespace kneescout
