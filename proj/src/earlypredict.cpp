#include "kneescout/earlypredict.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "kneescout/error.hpp"
#include "kneescout/io.hpp"

namespace kneescout {

namespace {

constexpr std::string_view kCycleHeader = "cycle,voltage_v,discharge_capacity_ah";

// Q at voltage v on a descending-voltage curve, linear between samples.
double interp_descending(const CycleRecord& rec, double v) {
    const auto& V = rec.voltage_v;
    const auto& Q = rec.q_ah;
    if (v >= V.front()) return Q.front();
    if (v <= V.back()) return Q.back();
    // first sample with voltage <= v
    auto it = std::lower_bound(V.begin(), V.end(), v, [](double a, double b) { return a > b; });
    const std::size_t hi = static_cast<std::size_t>(it - V.begin());
    const std::size_t lo = hi - 1;
    const double t = (V[lo] - v) / (V[lo] - V[hi]);
    return Q[lo] + t * (Q[hi] - Q[lo]);
}

}  // namespace

void validate(const CycleRecord& rec) {
    if (rec.voltage_v.size() != rec.q_ah.size())
        fail(ErrorCode::LengthMismatch, "cycle " + std::to_string(rec.cycle) + ": voltage and capacity lengths differ");
    if (rec.voltage_v.size() < 2)
        fail(ErrorCode::InvalidArgument, "cycle " + std::to_string(rec.cycle) + ": needs at least 2 samples");
    for (std::size_t i = 0; i < rec.voltage_v.size(); ++i) {
        if (!std::isfinite(rec.voltage_v[i]) || !std::isfinite(rec.q_ah[i]))
            fail(ErrorCode::InvalidArgument, "cycle " + std::to_string(rec.cycle) + ": non-finite sample");
        if (i == 0) continue;
        if (!(rec.voltage_v[i] < rec.voltage_v[i - 1]))
            fail(ErrorCode::InvalidArgument, "cycle " + std::to_string(rec.cycle) + ": voltage must strictly decrease");
        if (rec.q_ah[i] < rec.q_ah[i - 1])
            fail(ErrorCode::InvalidArgument, "cycle " + std::to_string(rec.cycle) + ": capacity must not decrease");
    }
}

CellRecords parse_cycle_csv(std::string_view text) {
    auto lines = io::split_lines(text);
    if (lines.empty() || io::trim(lines.front()) != kCycleHeader)
        fail(ErrorCode::MissingColumn, "expected header '" + std::string(kCycleHeader) + "'");
    CellRecords records;
    for (std::size_t ln = 1; ln < lines.size(); ++ln) {
        if (io::trim(lines[ln]).empty()) continue;
        auto f = io::split_fields(lines[ln]);
        long long cycle = 0;
        double v = 0.0, q = 0.0;
        if (f.size() != 3 || !io::parse_int(f[0], cycle) || !io::parse_double(f[1], v) || !io::parse_double(f[2], q))
            fail(ErrorCode::ParseError, "malformed row at line " + std::to_string(ln + 1));
        if (records.empty() || records.back().cycle != cycle) {
            for (const auto& r : records)
                if (r.cycle == cycle)
                    fail(ErrorCode::ParseError, "rows for cycle " + std::to_string(cycle) + " are not grouped");
            records.push_back(CycleRecord{cycle, {}, {}});
        }
        records.back().voltage_v.push_back(v);
        records.back().q_ah.push_back(q);
    }
    for (const auto& r : records) validate(r);
    std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) { return a.cycle < b.cycle; });
    return records;
}

CellRecords load_cycle_csv(const std::filesystem::path& path) { return parse_cycle_csv(io::read_file(path)); }

void write_cycle_csv(const std::filesystem::path& path, const CellRecords& records) {
    std::ostringstream out;
    out << kCycleHeader << '\n';
    for (const auto& r : records)
        for (std::size_t i = 0; i < r.voltage_v.size(); ++i)
            out << r.cycle << ',' << io::format_double(r.voltage_v[i]) << ',' << io::format_double(r.q_ah[i]) << '\n';
    io::write_file_atomic(path, out.str());
}

const CycleRecord& find_cycle(const CellRecords& records, Cycle cycle) {
    auto it = std::lower_bound(records.begin(), records.end(), cycle,
                               [](const CycleRecord& r, Cycle c) { return r.cycle < c; });
    if (it == records.end() || it->cycle != cycle) fail(ErrorCode::MissingCycle, "cycle " + std::to_string(cycle) + " missing");
    return *it;
}

std::vector<double> delta_q(const CellRecords& records, Cycle early, Cycle late, int grid_points) {
    if (grid_points < 2) fail(ErrorCode::InvalidArgument, "voltage grid needs at least 2 points");
    const auto& a = find_cycle(records, early);
    const auto& b = find_cycle(records, late);
    const double hi = std::min(a.voltage_v.front(), b.voltage_v.front());
    const double lo = std::max(a.voltage_v.back(), b.voltage_v.back());
    if (!(hi > lo)) fail(ErrorCode::NoVoltageOverlap, "voltage ranges of the two cycles do not overlap");
    std::vector<double> dq(static_cast<std::size_t>(grid_points));
    const double step = (hi - lo) / static_cast<double>(grid_points - 1);
    for (int i = 0; i < grid_points; ++i) {
        const double v = (i == grid_points - 1) ? hi : lo + step * i;
        dq[static_cast<std::size_t>(i)] = interp_descending(b, v) - interp_descending(a, v);
    }
    return dq;
}

Moments moments(std::span<const double> v) {
    Moments m;
    if (v.empty()) return m;
    const double n = static_cast<double>(v.size());
    m.mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double m2 = 0, m3 = 0, m4 = 0;
    for (double x : v) {
        const double d = x - m.mean;
        const double d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    m.variance = m2;
    // spread below round-off of the mean counts as zero variance
    const double sd = std::sqrt(m2);
    if (sd <= 1e-12 * std::max(1.0, std::abs(m.mean))) {
        m.variance = 0.0;
        m.skewness = 0.0;
        m.kurtosis = 0.0;
        return m;
    }
    m.skewness = m3 / (m2 * sd);
    m.kurtosis = m4 / (m2 * m2);
    return m;
}

FeatureVector extract_features(const CellRecords& records, int budget) {
    if (budget < 11) fail(ErrorCode::InvalidArgument, "cycle budget must be at least 11");
    const auto dq = delta_q(records, 10, budget);
    const auto mo = moments(dq);
    const double q2 = find_cycle(records, 2).discharge_capacity();
    double qmax = -std::numeric_limits<double>::infinity();
    for (const auto& r : records)
        if (r.cycle >= 1 && r.cycle <= budget) qmax = std::max(qmax, r.discharge_capacity());

    FeatureVector f;
    f.min_dq = *std::min_element(dq.begin(), dq.end());
    f.var_dq = mo.variance;
    f.skew_dq = mo.skewness;
    f.kurt_dq = mo.kurtosis;
    f.q2 = q2;
    f.q_max_minus_2 = qmax - q2;
    return f;
}

int onset_class(double onset) noexcept {
    if (onset < 150.0) return 0;
    if (onset <= 270.0) return 1;
    return 2;
}

Split stratified_split(std::span<const double> labels, double train_frac, std::uint64_t seed) {
    if (labels.empty()) fail(ErrorCode::InvalidArgument, "stratified split needs at least one sample");
    if (!(train_frac > 0.0 && train_frac <= 1.0)) fail(ErrorCode::InvalidArgument, "train fraction must lie in (0,1]");
    std::array<std::vector<std::size_t>, 3> classes;
    for (std::size_t i = 0; i < labels.size(); ++i) classes[static_cast<std::size_t>(onset_class(labels[i]))].push_back(i);

    std::mt19937_64 rng(seed);
    Split split;
    for (auto& members : classes) {
        for (std::size_t i = members.size(); i > 1; --i) std::swap(members[i - 1], members[rng() % i]);
        const double want = train_frac * static_cast<double>(members.size());
        const auto n_train = std::min(members.size(), static_cast<std::size_t>(std::ceil(want - 1e-9)));
        split.train.insert(split.train.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_train));
        split.test.insert(split.test.end(), members.begin() + static_cast<std::ptrdiff_t>(n_train), members.end());
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

double RegressionTree::predict(std::span<const double> x) const {
    std::size_t at = 0;
    while (nodes[at].feature >= 0) {
        const auto& n = nodes[at];
        at = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
    }
    return nodes[at].value;
}

namespace {

class TreeBuilder {
public:
    TreeBuilder(const FeatureMatrix& X, std::span<const double> target, const GbrtHyper& h)
        : X_(X), target_(target), hyper_(h) {}

    RegressionTree build() {
        std::vector<std::size_t> all(X_.size());
        std::iota(all.begin(), all.end(), 0);
        tree_.nodes.clear();
        grow(all, 0);
        return std::move(tree_);
    }

private:
    struct Cut {
        int feature = -1;
        double threshold = 0.0;
        double gain = 0.0;
    };

    double mean_of(const std::vector<std::size_t>& idx) const {
        double s = 0.0;
        for (auto i : idx) s += target_[i];
        return s / static_cast<double>(idx.size());
    }

    Cut best_cut(const std::vector<std::size_t>& idx) const {
        const std::size_t n = idx.size();
        const auto min_leaf = static_cast<std::size_t>(std::max(1, hyper_.min_leaf));
        double total = 0.0;
        for (auto i : idx) total += target_[i];
        const double base = total * total / static_cast<double>(n);

        Cut best;
        std::vector<std::size_t> order(idx);
        const std::size_t n_features = X_.front().size();
        for (std::size_t f = 0; f < n_features; ++f) {
            std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return X_[a][f] < X_[b][f]; });
            double left = 0.0;
            for (std::size_t k = 0; k + 1 < n; ++k) {
                left += target_[order[k]];
                const double xa = X_[order[k]][f];
                const double xb = X_[order[k + 1]][f];
                const std::size_t nl = k + 1, nr = n - nl;
                if (xa == xb || nl < min_leaf || nr < min_leaf) continue;
                const double right = total - left;
                const double gain = left * left / static_cast<double>(nl) + right * right / static_cast<double>(nr) - base;
                if (gain > best.gain * (1.0 + 1e-12) + 1e-300) {
                    double thr = xa + (xb - xa) / 2.0;
                    if (!(thr < xb)) thr = xa;
                    best = {static_cast<int>(f), thr, gain};
                }
            }
        }
        return best;
    }

    int grow(const std::vector<std::size_t>& idx, int depth) {
        const int id = static_cast<int>(tree_.nodes.size());
        tree_.nodes.push_back(TreeNode{-1, 0.0, -1, -1, mean_of(idx)});
        if (depth >= hyper_.max_depth || idx.size() < 2 * static_cast<std::size_t>(std::max(1, hyper_.min_leaf)))
            return id;
        const Cut cut = best_cut(idx);
        if (cut.feature < 0) return id;
        std::vector<std::size_t> l, r;
        for (auto i : idx) (X_[i][static_cast<std::size_t>(cut.feature)] <= cut.threshold ? l : r).push_back(i);
        const int left = grow(l, depth + 1);
        const int right = grow(r, depth + 1);
        auto& node = tree_.nodes[static_cast<std::size_t>(id)];
        node.feature = cut.feature;
        node.threshold = cut.threshold;
        node.left = left;
        node.right = right;
        node.value = 0.0;
        return id;
    }

    const FeatureMatrix& X_;
    std::span<const double> target_;
    GbrtHyper hyper_;
    RegressionTree tree_;
};

double rmse_of(std::span<const double> y, std::span<const double> f) {
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - f[i]) * (y[i] - f[i]);
    return std::sqrt(s / static_cast<double>(y.size()));
}

}  // namespace

GbrtModel gbrt_train(const FeatureMatrix& X, std::span<const double> y, const GbrtHyper& hyper,
                     std::vector<double>* train_rmse) {
    if (X.empty() || y.empty()) fail(ErrorCode::EmptyTrainingSet, "no training samples");
    if (X.size() != y.size()) fail(ErrorCode::LengthMismatch, "feature rows and labels differ in count");
    if (X.size() < 2) fail(ErrorCode::EmptyTrainingSet, "training needs at least 2 samples");
    const std::size_t width = X.front().size();
    if (width == 0) fail(ErrorCode::FeatureCountMismatch, "feature rows are empty");
    for (const auto& row : X) {
        if (row.size() != width) fail(ErrorCode::FeatureCountMismatch, "ragged feature matrix");
        for (double v : row)
            if (!std::isfinite(v)) fail(ErrorCode::NonFiniteFeature, "feature matrix contains a non-finite value");
    }
    if (hyper.n_trees < 0 || hyper.max_depth < 0 || hyper.min_leaf < 1 ||
        !(hyper.learning_rate > 0.0 && hyper.learning_rate <= 1.0))
        fail(ErrorCode::InvalidArgument, "invalid boosting hyperparameters");

    GbrtModel model;
    model.n_features = width;
    model.learning_rate = hyper.learning_rate;
    model.init_value = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());

    std::vector<double> fitted(y.size(), model.init_value), residual(y.size());
    if (train_rmse) {
        train_rmse->clear();
        train_rmse->push_back(rmse_of(y, fitted));
    }
    for (int t = 0; t < hyper.n_trees; ++t) {
        for (std::size_t i = 0; i < y.size(); ++i) residual[i] = y[i] - fitted[i];
        auto tree = TreeBuilder(X, residual, hyper).build();
        for (std::size_t i = 0; i < y.size(); ++i) fitted[i] += hyper.learning_rate * tree.predict(X[i]);
        model.trees.push_back(std::move(tree));
        if (train_rmse) train_rmse->push_back(rmse_of(y, fitted));
    }
    return model;
}

double gbrt_predict(const GbrtModel& model, std::span<const double> x) {
    if (x.size() != model.n_features)
        fail(ErrorCode::FeatureCountMismatch, "expected " + std::to_string(model.n_features) + " features, got " +
                                                  std::to_string(x.size()));
    double acc = 0.0;
    for (const auto& t : model.trees) acc += t.predict(x);
    return model.init_value + model.learning_rate * acc;
}

std::vector<double> gbrt_predict(const GbrtModel& model, const FeatureMatrix& X) {
    std::vector<double> out;
    out.reserve(X.size());
    for (const auto& row : X) out.push_back(gbrt_predict(model, row));
    return out;
}

std::string model_to_json(const GbrtModel& model) {
    nlohmann::ordered_json j;
    j["init_value"] = model.init_value;
    j["learning_rate"] = model.learning_rate;
    j["n_features"] = model.n_features;
    auto trees = nlohmann::ordered_json::array();
    for (const auto& t : model.trees) {
        auto nodes = nlohmann::ordered_json::array();
        for (const auto& n : t.nodes)
            nodes.push_back({{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left}, {"right", n.right},
                             {"value", n.value}});
        trees.push_back(std::move(nodes));
    }
    j["trees"] = std::move(trees);
    return j.dump() + "\n";
}

GbrtModel model_from_json(std::string_view text) {
    GbrtModel m;
    try {
        const auto j = nlohmann::json::parse(text);
        m.init_value = j.at("init_value").get<double>();
        m.learning_rate = j.at("learning_rate").get<double>();
        m.n_features = j.at("n_features").get<std::size_t>();
        for (const auto& t : j.at("trees")) {
            RegressionTree tree;
            for (const auto& n : t)
                tree.nodes.push_back(TreeNode{n.at("feature").get<int>(), n.at("threshold").get<double>(),
                                              n.at("left").get<int>(), n.at("right").get<int>(),
                                              n.at("value").get<double>()});
            const auto size = static_cast<int>(tree.nodes.size());
            if (size == 0) fail(ErrorCode::ParseError, "model contains an empty tree");
            for (const auto& n : tree.nodes)
                if (n.feature >= 0 && (n.feature >= static_cast<int>(m.n_features) || n.left <= 0 || n.right <= 0 ||
                                       n.left >= size || n.right >= size))
                    fail(ErrorCode::ParseError, "model tree has an invalid node");
            m.trees.push_back(std::move(tree));
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::ParseError, std::string("model file: ") + e.what());
    }
    return m;
}

Metrics evaluate(std::span<const double> y, std::span<const double> y_hat) {
    if (y.size() != y_hat.size()) fail(ErrorCode::LengthMismatch, "truth and prediction lengths differ");
    if (y.empty()) fail(ErrorCode::InvalidArgument, "nothing to evaluate");
    Metrics m;
    double se = 0.0, ape = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] == 0.0) fail(ErrorCode::ZeroTrueValue, "MAPE is undefined for a zero true value");
        const double e = y_hat[i] - y[i];
        se += e * e;
        ape += std::abs(e / y[i]);
    }
    const double n = static_cast<double>(y.size());
    m.rmse = std::sqrt(se / n);
    m.mape = ape / n * 100.0;
    return m;
}

std::vector<SweepRow> sensitivity_sweep(const std::vector<FleetCell>& cells, std::span<const int> budgets, int repeats,
                                        std::uint64_t seed, const GbrtHyper& hyper, unsigned threads) {
    if (cells.size() < 2) fail(ErrorCode::EmptyTrainingSet, "sweep needs at least 2 cells");
    if (repeats < 1) fail(ErrorCode::InvalidArgument, "repeats must be at least 1");
    std::vector<double> labels;
    for (const auto& c : cells) labels.push_back(c.onset_cycle);

    std::vector<SweepRow> rows;
    for (int budget : budgets) {
        if (budget < 11) fail(ErrorCode::InvalidArgument, "cycle budget must be at least 11");
        FeatureMatrix X(cells.size());
        auto extract = [&](std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) {
                const auto f = extract_features(cells[i].records, budget).to_array();
                X[i].assign(f.begin(), f.end());
            }
        };
        const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(cells.size())));
        if (workers == 1) {
            extract(0, cells.size());
        } else {
            std::vector<std::jthread> pool;
            const std::size_t step = (cells.size() + workers - 1) / workers;
            for (std::size_t b = 0; b < cells.size(); b += step) pool.emplace_back(extract, b, std::min(cells.size(), b + step));
        }

        SweepRow row;
        row.budget = budget;
        double mape_sum = 0.0;
        for (int r = 0; r < repeats; ++r) {
            const auto split = stratified_split(labels, 0.8, seed + static_cast<std::uint64_t>(r));
            if (split.test.empty()) fail(ErrorCode::InvalidArgument, "split left no test cells");
            FeatureMatrix Xtr, Xte;
            std::vector<double> ytr, yte;
            for (auto i : split.train) {
                Xtr.push_back(X[i]);
                ytr.push_back(labels[i]);
            }
            for (auto i : split.test) {
                Xte.push_back(X[i]);
                yte.push_back(labels[i]);
            }
            std::vector<double> trace;
            const auto model = gbrt_train(Xtr, ytr, hyper, &trace);
            for (std::size_t k = 1; k < trace.size(); ++k)
                if (trace[k] > trace[k - 1]) row.train_rmse_monotone = false;
            const auto metrics = evaluate(yte, gbrt_predict(model, Xte));
            row.rmse_per_split.push_back(metrics.rmse);
            mape_sum += metrics.mape;
        }
        row.rmse = std::accumulate(row.rmse_per_split.begin(), row.rmse_per_split.end(), 0.0) / repeats;
        row.mape = mape_sum / repeats;
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace kneescout
