#include "kneescout/report.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "kneescout/error.hpp"
#include "kneescout/io.hpp"

namespace kneescout {

double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) fail(ErrorCode::LengthMismatch, "pearson inputs differ in length");
    if (x.size() < 2) fail(ErrorCode::InvalidArgument, "pearson needs at least 2 pairs");
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) fail(ErrorCode::ConstantInput, "pearson input is constant");
    return std::clamp(sxy / (std::sqrt(sxx) * std::sqrt(syy)), -1.0, 1.0);
}

double improvement_percent(double r_new, double r_old) {
    if (r_old == 0.0) fail(ErrorCode::InvalidArgument, "benchmark correlation is zero");
    return (r_new - r_old) / r_old * 100.0;
}

namespace {

CorrelationReport correlate(Method method, const std::vector<BatchRow>& rows) {
    CorrelationReport rep;
    rep.method = method;
    std::vector<double> onset, knee, eol;
    double gap_sum = 0.0;
    std::size_t total = 0;
    for (const auto& r : rows) {
        if (r.method != method) continue;
        ++total;
        gap_sum += static_cast<double>(r.gap);
        if (!r.eol_cycle) {
            ++rep.n_excluded;
            continue;
        }
        onset.push_back(static_cast<double>(r.onset_cycle));
        knee.push_back(static_cast<double>(r.knee_cycle));
        eol.push_back(static_cast<double>(*r.eol_cycle));
    }
    rep.n_cells = eol.size();
    rep.mean_gap = total > 0 ? gap_sum / static_cast<double>(total) : 0.0;
    if (rep.n_cells < 2) {
        rep.problem = "fewer than 2 cells with a defined EoL";
        return rep;
    }
    try {
        rep.r_onset_eol = pearson(onset, eol);
    } catch (const Error& e) {
        rep.problem = std::string(to_string(e.code()));
    }
    try {
        rep.r_knee_eol = pearson(knee, eol);
    } catch (const Error& e) {
        rep.problem = std::string(to_string(e.code()));
    }
    return rep;
}

}  // namespace

BatchResult batch_report(const std::vector<CapacityFadeSeries>& cells, const BatchOptions& options) {
    if (options.methods.empty()) fail(ErrorCode::InvalidArgument, "no identification method selected");
    std::vector<std::size_t> order(cells.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return cells[a].cell_id < cells[b].cell_id; });

    const std::size_t n_methods = options.methods.size();
    const std::size_t n_tasks = cells.size() * n_methods;
    std::vector<std::optional<KneeReport>> reports(n_tasks);
    std::vector<std::exception_ptr> errors(n_tasks);
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        for (std::size_t t = next++; t < n_tasks; t = next++) {
            const auto& cell = cells[order[t / n_methods]];
            const Method m = options.methods[t % n_methods];
            try {
                reports[t] = m == Method::CurvatureRea ? identify_knees(cell, options.pipeline)
                                                       : identify_knees_dbw(cell, options.dbw, options.pipeline);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        }
    };
    const unsigned jobs = std::max(1u, std::min<unsigned>(options.jobs, static_cast<unsigned>(std::max<std::size_t>(n_tasks, 1))));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    BatchResult result;
    for (std::size_t t = 0; t < n_tasks; ++t) {
        const auto& rep = *reports[t];
        BatchRow row;
        row.cell_id = rep.cell_id;
        row.method = rep.method;
        row.onset_cycle = rep.onset_cycle;
        row.knee_cycle = rep.knee_cycle;
        row.eol_cycle = rep.eol_cycle;
        row.gap = rep.knee_cycle - rep.onset_cycle;
        if (auto it = rep.diagnostics.find("knee_evidence_weak"); it != rep.diagnostics.end()) row.knee_evidence_weak = it->second > 0.5;
        if (auto it = rep.diagnostics.find("transitions_identifiable"); it != rep.diagnostics.end()) row.knee_evidence_weak = it->second < 0.5;
        result.rows.push_back(std::move(row));
    }
    for (Method m : options.methods) result.correlations.push_back(correlate(m, result.rows));

    const CorrelationReport* curv = nullptr;
    const CorrelationReport* dbw = nullptr;
    for (const auto& c : result.correlations) (c.method == Method::CurvatureRea ? curv : dbw) = &c;
    if (curv && dbw) {
        if (curv->r_onset_eol && dbw->r_onset_eol && *dbw->r_onset_eol != 0.0)
            result.improvement_onset_pct = improvement_percent(*curv->r_onset_eol, *dbw->r_onset_eol);
        if (curv->r_knee_eol && dbw->r_knee_eol && *dbw->r_knee_eol != 0.0)
            result.improvement_knee_pct = improvement_percent(*curv->r_knee_eol, *dbw->r_knee_eol);
    }
    return result;
}

std::string batch_csv(const BatchResult& result) {
    std::ostringstream out;
    out << "cell_id,method,onset_cycle,knee_cycle,eol_cycle,gap\n";
    for (const auto& r : result.rows) {
        out << r.cell_id << ',' << to_string(r.method) << ',' << r.onset_cycle << ',' << r.knee_cycle << ',';
        if (r.eol_cycle) out << *r.eol_cycle;
        out << ',' << r.gap << '\n';
    }
    auto opt = [](const std::optional<double>& v) { return v ? io::format_double(*v) : std::string("undefined"); };
    for (const auto& c : result.correlations) {
        const std::string tag = "[" + std::string(to_string(c.method)) + "]";
        out << "# pearson_onset_eol" << tag << '=' << opt(c.r_onset_eol) << '\n';
        out << "# pearson_knee_eol" << tag << '=' << opt(c.r_knee_eol) << '\n';
        out << "# n_cells" << tag << '=' << c.n_cells << '\n';
        out << "# n_excluded_no_eol" << tag << '=' << c.n_excluded << '\n';
        out << "# mean_gap" << tag << '=' << io::format_double(c.mean_gap) << '\n';
        if (!c.problem.empty()) out << "# problem" << tag << '=' << c.problem << '\n';
    }
    if (result.improvement_onset_pct) out << "# improvement_onset_pct=" << io::format_double(*result.improvement_onset_pct) << '\n';
    if (result.improvement_knee_pct) out << "# improvement_knee_pct=" << io::format_double(*result.improvement_knee_pct) << '\n';
    std::string weak;
    for (const auto& r : result.rows)
        if (r.knee_evidence_weak) weak += (weak.empty() ? "" : ";") + r.cell_id + "/" + std::string(to_string(r.method));
    if (!weak.empty()) out << "# knee_evidence_weak=" << weak << '\n';
    return out.str();
}

void write_scatter_files(const std::filesystem::path& dir, const BatchResult& result) {
    for (const auto& c : result.correlations) {
        std::ostringstream onset, knee;
        onset << "onset_or_knee_cycle,eol_cycle\n";
        knee << "onset_or_knee_cycle,eol_cycle\n";
        for (const auto& r : result.rows) {
            if (r.method != c.method || !r.eol_cycle) continue;
            onset << r.onset_cycle << ',' << *r.eol_cycle << '\n';
            knee << r.knee_cycle << ',' << *r.eol_cycle << '\n';
        }
        const std::string stem = "scatter_" + std::string(to_string(c.method));
        io::write_file_atomic(dir / (stem + "_onset.csv"), onset.str());
        io::write_file_atomic(dir / (stem + "_knee.csv"), knee.str());
    }
}

std::string knee_report_json(const KneeReport& report) {
    auto number = [](double v) -> nlohmann::ordered_json {
        if (std::isfinite(v) && v == std::floor(v) && std::abs(v) < 9e15) return static_cast<long long>(v);
        return v;
    };
    nlohmann::ordered_json j;
    j["cell_id"] = report.cell_id;
    j["method"] = to_string(report.method);
    j["onset_cycle"] = report.onset_cycle;
    j["knee_cycle"] = report.knee_cycle;
    j["eol_cycle"] = report.eol_cycle ? nlohmann::ordered_json(*report.eol_cycle) : nlohmann::ordered_json(nullptr);
    auto params = nlohmann::ordered_json::object();
    for (const auto& [k, v] : report.params) params[k] = number(v);
    j["params"] = std::move(params);
    auto diag = nlohmann::ordered_json::object();
    for (const auto& [k, v] : report.diagnostics) diag[k] = v;
    j["diagnostics"] = std::move(diag);
    return j.dump(2) + "\n";
}

}  // namespace kneescout
