#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kneescout/ingest.hpp"

namespace kneescout {

// Discharge capacity against voltage for one cycle; voltage descends.
struct CycleRecord {
    Cycle cycle = 0;
    std::vector<double> voltage_v;
    std::vector<double> q_ah;

    double discharge_capacity() const { return q_ah.back(); }
};

using CellRecords = std::vector<CycleRecord>;  // ascending cycle

void validate(const CycleRecord& record);

CellRecords parse_cycle_csv(std::string_view text);
CellRecords load_cycle_csv(const std::filesystem::path& path);
void write_cycle_csv(const std::filesystem::path& path, const CellRecords& records);

const CycleRecord& find_cycle(const CellRecords& records, Cycle cycle);

std::vector<double> delta_q(const CellRecords& records, Cycle early = 10, Cycle late = 30, int grid_points = 1000);

struct Moments {
    double mean = 0.0;
    double variance = 0.0;  // population
    double skewness = 0.0;
    double kurtosis = 0.0;  // non-excess
};
Moments moments(std::span<const double> v);

struct FeatureVector {
    double min_dq = 0.0;
    double var_dq = 0.0;
    double skew_dq = 0.0;
    double kurt_dq = 0.0;
    double q2 = 0.0;
    double q_max_minus_2 = 0.0;

    static constexpr std::size_t kSize = 6;
    static constexpr std::array<std::string_view, kSize> kNames{"min_dq", "var_dq", "skew_dq",
                                                                 "kurt_dq", "q2", "q_max_minus_2"};
    std::array<double, kSize> to_array() const { return {min_dq, var_dq, skew_dq, kurt_dq, q2, q_max_minus_2}; }
};

FeatureVector extract_features(const CellRecords& records, int budget);

int onset_class(double onset_cycle) noexcept;

struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};
Split stratified_split(std::span<const double> onset_labels, double train_frac = 0.8, std::uint64_t seed = 42);

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
};

struct RegressionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root
    double predict(std::span<const double> x) const;
};

struct GbrtHyper {
    int n_trees = 300;
    double learning_rate = 0.05;
    int max_depth = 3;
    int min_leaf = 2;
};

struct GbrtModel {
    double init_value = 0.0;
    double learning_rate = 0.05;
    std::size_t n_features = 0;
    std::vector<RegressionTree> trees;
};

using FeatureMatrix = std::vector<std::vector<double>>;  // one row per sample

// `train_rmse`, when given, receives the training RMSE after 0, 1, ..., n_trees trees.
GbrtModel gbrt_train(const FeatureMatrix& X, std::span<const double> y, const GbrtHyper& hyper = {},
                     std::vector<double>* train_rmse = nullptr);
double gbrt_predict(const GbrtModel& model, std::span<const double> x);
std::vector<double> gbrt_predict(const GbrtModel& model, const FeatureMatrix& X);

std::string model_to_json(const GbrtModel& model);
GbrtModel model_from_json(std::string_view text);

struct Metrics {
    double rmse = 0.0;
    double mape = 0.0;  // percent
};
Metrics evaluate(std::span<const double> y, std::span<const double> y_hat);

struct FleetCell {
    std::string cell_id;
    CellRecords records;
    double onset_cycle = 0.0;
};

struct SweepRow {
    int budget = 0;
    double rmse = 0.0;
    double mape = 0.0;
    std::vector<double> rmse_per_split;
    bool train_rmse_monotone = true;
};

std::vector<SweepRow> sensitivity_sweep(const std::vector<FleetCell>& cells, std::span<const int> budgets,
                                        int repeats = 5, std::uint64_t seed = 42, const GbrtHyper& hyper = {},
                                        unsigned threads = 1);

}  // namespace kneescout
