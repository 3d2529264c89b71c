#include "kneescout/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "kneescout/error.hpp"
#include "kneescout/io.hpp"

namespace kneescout {

namespace {

constexpr std::string_view kCapacityHeader = "cycle,discharge_capacity_ah";

}  // namespace

void validate(const CapacityFadeSeries& series) {
    if (series.cycles.size() != series.capacity_ah.size())
        fail(ErrorCode::LengthMismatch, "cycles and capacity lengths differ");
    if (series.cycles.size() < 3) fail(ErrorCode::TooShort, "series needs at least 3 points");
    for (std::size_t i = 0; i < series.cycles.size(); ++i) {
        if (series.cycles[i] < 0) fail(ErrorCode::NonMonotonicCycles, "negative cycle index");
        if (i > 0 && series.cycles[i] <= series.cycles[i - 1])
            fail(ErrorCode::NonMonotonicCycles,
                 "cycle " + std::to_string(series.cycles[i]) + " does not follow " +
                     std::to_string(series.cycles[i - 1]));
        const double q = series.capacity_ah[i];
        if (!std::isfinite(q) || q <= 0.0)
            fail(ErrorCode::NonPositiveCapacity, "capacity at cycle " + std::to_string(series.cycles[i]) +
                                                     " is not positive");
    }
    if (!(series.q_nom_ah > 0.0) || !std::isfinite(series.q_nom_ah))
        fail(ErrorCode::NonPositiveNominal, "nominal capacity must be positive");
}

CapacityFadeSeries parse_capacity_csv(std::string_view text, std::string cell_id, double q_nom_ah) {
    auto lines = io::split_lines(text);
    if (lines.empty() || io::trim(lines.front()) != kCapacityHeader)
        fail(ErrorCode::MissingColumn, "expected header '" + std::string(kCapacityHeader) + "'");

    CapacityFadeSeries series;
    series.cell_id = std::move(cell_id);
    series.q_nom_ah = q_nom_ah;
    for (std::size_t ln = 1; ln < lines.size(); ++ln) {
        if (io::trim(lines[ln]).empty()) continue;
        auto fields = io::split_fields(lines[ln]);
        long long cycle = 0;
        double q = 0.0;
        if (fields.size() != 2 || !io::parse_int(fields[0], cycle) || !io::parse_double(fields[1], q))
            fail(ErrorCode::ParseError, "malformed row at line " + std::to_string(ln + 1));
        series.cycles.push_back(cycle);
        series.capacity_ah.push_back(q);
    }
    validate(series);
    return series;
}

std::filesystem::path metadata_path(const std::filesystem::path& csv_path) {
    auto p = csv_path;
    p.replace_extension(".meta.json");
    return p;
}

CapacityFadeSeries load_capacity_csv(const std::filesystem::path& path, const LoadOverrides& overrides) {
    const std::string text = io::read_file(path);

    std::string cell_id = path.stem().string();
    std::optional<double> q_nom;
    const auto meta = metadata_path(path);
    if (std::filesystem::exists(meta)) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(io::read_file(meta));
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorCode::ParseError, meta.string() + ": " + e.what());
        }
        if (j.contains("cell_id") && j["cell_id"].is_string()) cell_id = j["cell_id"].get<std::string>();
        if (j.contains("q_nom_ah") && j["q_nom_ah"].is_number()) q_nom = j["q_nom_ah"].get<double>();
    }
    if (overrides.cell_id) cell_id = *overrides.cell_id;
    if (overrides.q_nom_ah) q_nom = overrides.q_nom_ah;
    if (!q_nom)
        fail(ErrorCode::MissingMetadata,
             "no nominal capacity for " + path.string() + " (add " + meta.filename().string() + " or pass --q-nom)");
    return parse_capacity_csv(text, std::move(cell_id), *q_nom);
}

void write_capacity_csv(const std::filesystem::path& path, const CapacityFadeSeries& series) {
    std::ostringstream out;
    out << kCapacityHeader << '\n';
    for (std::size_t i = 0; i < series.size(); ++i)
        out << series.cycles[i] << ',' << io::format_double(series.capacity_ah[i]) << '\n';
    io::write_file_atomic(path, out.str());
}

void write_metadata(const std::filesystem::path& path, const CapacityFadeSeries& series) {
    nlohmann::ordered_json j;
    j["cell_id"] = series.cell_id;
    j["q_nom_ah"] = series.q_nom_ah;
    io::write_file_atomic(path, j.dump(2) + "\n");
}

NaturalCubicSpline::NaturalCubicSpline(std::span<const double> x, std::span<const double> y)
    : x_(x.begin(), x.end()), y_(y.begin(), y.end()), second_(x.size(), 0.0) {
    const std::size_t n = x_.size();
    if (n != y_.size()) fail(ErrorCode::LengthMismatch, "spline x and y lengths differ");
    if (n < 2) fail(ErrorCode::TooShort, "spline needs at least 2 knots");
    for (std::size_t i = 1; i < n; ++i)
        if (!(x_[i] > x_[i - 1])) fail(ErrorCode::NonMonotonicCycles, "spline knots must increase");
    if (n == 2) return;

    // Thomas algorithm on the interior second derivatives.
    const std::size_t m = n - 2;
    std::vector<double> diag(m), upper(m), rhs(m);
    for (std::size_t k = 0; k < m; ++k) {
        const std::size_t i = k + 1;
        const double h0 = x_[i] - x_[i - 1];
        const double h1 = x_[i + 1] - x_[i];
        diag[k] = 2.0 * (h0 + h1);
        upper[k] = h1;
        rhs[k] = 6.0 * ((y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0);
    }
    for (std::size_t k = 1; k < m; ++k) {
        const double lower = x_[k + 1] - x_[k];
        const double w = lower / diag[k - 1];
        diag[k] -= w * upper[k - 1];
        rhs[k] -= w * rhs[k - 1];
    }
    std::vector<double> sol(m);
    sol[m - 1] = rhs[m - 1] / diag[m - 1];
    for (std::size_t k = m - 1; k-- > 0;) sol[k] = (rhs[k] - upper[k] * sol[k + 1]) / diag[k];
    std::copy(sol.begin(), sol.end(), second_.begin() + 1);
}

double NaturalCubicSpline::operator()(double x) const {
    const std::size_t n = x_.size();
    auto it = std::upper_bound(x_.begin(), x_.end(), x);
    std::size_t hi = static_cast<std::size_t>(it - x_.begin());
    hi = std::clamp<std::size_t>(hi, 1, n - 1);
    const std::size_t lo = hi - 1;
    const double h = x_[hi] - x_[lo];
    const double a = (x_[hi] - x) / h;
    const double b = (x - x_[lo]) / h;
    return a * y_[lo] + b * y_[hi] +
           ((a * a * a - a) * second_[lo] + (b * b * b - b) * second_[hi]) * (h * h) / 6.0;
}

bool is_unit_spaced(std::span<const Cycle> cycles) noexcept {
    for (std::size_t i = 1; i < cycles.size(); ++i)
        if (cycles[i] - cycles[i - 1] != 1) return false;
    return true;
}

CapacityFadeSeries resample_even(const CapacityFadeSeries& series) {
    if (series.cycles.size() != series.capacity_ah.size())
        fail(ErrorCode::LengthMismatch, "cycles and capacity lengths differ");
    for (std::size_t i = 1; i < series.cycles.size(); ++i)
        if (series.cycles[i] <= series.cycles[i - 1])
            fail(ErrorCode::NonMonotonicCycles, "cycles must be strictly increasing");
    if (is_unit_spaced(series.cycles)) return series;
    if (series.size() < 4) fail(ErrorCode::TooShort, "uneven spacing needs at least 4 points for a cubic spline");

    std::vector<double> x(series.cycles.begin(), series.cycles.end());
    NaturalCubicSpline spline(x, series.capacity_ah);

    CapacityFadeSeries out;
    out.cell_id = series.cell_id;
    out.q_nom_ah = series.q_nom_ah;
    const Cycle first = series.cycles.front();
    const Cycle last = series.cycles.back();
    out.cycles.reserve(static_cast<std::size_t>(last - first + 1));
    out.capacity_ah.reserve(out.cycles.capacity());
    std::size_t knot = 0;
    for (Cycle c = first; c <= last; ++c) {
        out.cycles.push_back(c);
        while (knot < series.size() && series.cycles[knot] < c) ++knot;
        // knots keep their measured value rather than a re-evaluated one
        if (knot < series.size() && series.cycles[knot] == c)
            out.capacity_ah.push_back(series.capacity_ah[knot]);
        else
            out.capacity_ah.push_back(spline(static_cast<double>(c)));
    }
    return out;
}

NormalizedSeries normalize(const CapacityFadeSeries& series) {
    if (!(series.q_nom_ah > 0.0) || !std::isfinite(series.q_nom_ah))
        fail(ErrorCode::NonPositiveNominal, "nominal capacity must be positive");
    NormalizedSeries out;
    out.cycles = series.cycles;
    out.values.reserve(series.capacity_ah.size());
    for (double q : series.capacity_ah) out.values.push_back(q / series.q_nom_ah);
    return out;
}

std::optional<Cycle> find_eol(const NormalizedSeries& series, double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0)) fail(ErrorCode::InvalidArgument, "EoL threshold must lie in (0,1)");
    for (std::size_t i = 0; i < series.values.size(); ++i)
        if (series.values[i] <= threshold) return series.cycles[i];
    return std::nullopt;
}

}  // namespace kneescout
