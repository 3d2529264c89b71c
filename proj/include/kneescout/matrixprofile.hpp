#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace kneescout {

inline constexpr double kFlatStd = 1e-12;
inline constexpr double kMaskedDistance = std::numeric_limits<double>::infinity();

struct DistanceProfile {
    std::size_t query_start = 0;
    std::vector<double> distances;
};

struct MatrixProfile {
    std::vector<double> P;
    std::vector<std::size_t> I;
    int window = 0;
    int exclusion = 0;

    std::size_t size() const noexcept { return P.size(); }
};

struct WindowStats {
    std::vector<double> mean;
    std::vector<double> std;
};

WindowStats sliding_stats(std::span<const double> series, int window);

// z-normalized Euclidean distance between two equal-length windows, computed directly.
double znorm_distance(std::span<const double> a, std::span<const double> b);

int default_exclusion(int window) noexcept;

DistanceProfile mass(std::span<const double> query, std::span<const double> series);

// `threads` splits the query indices into contiguous blocks; output is independent of it.
MatrixProfile stamp(std::span<const double> series, int window, int exclusion = -1, unsigned threads = 1);

}  // namespace kneescout
