#include "kneescout/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "kneescout/baconwatts.hpp"
#include "kneescout/earlypredict.hpp"
#include "kneescout/error.hpp"
#include "kneescout/ingest.hpp"
#include "kneescout/io.hpp"
#include "kneescout/report.hpp"
#include "kneescout/segmentation.hpp"
#include "kneescout/synthgen.hpp"

namespace kneescout::cli {

namespace fs = std::filesystem;

namespace {

struct Options {
    // shared
    std::uint64_t seed = 42;
    unsigned jobs = 1;
    bool json_errors = false;

    // capacity input
    std::string input;
    std::string out;
    std::string dir;
    std::optional<double> q_nom;
    std::optional<std::string> cell_id;

    PipelineParams pipeline;
    std::optional<int> cac_window;
    std::optional<int> exclusion;
    DbwOptions dbw;
    std::string methods = "curvature,baconwatts";

    // synth
    int count = 10;
    std::string out_dir;
    std::string family = "knee";
    double noise = 0.0;
    int n_cycles = 2000;
    bool cycle_records = false;

    // early prediction
    std::vector<std::string> cycle_files;
    int budget = 30;
    std::string features;
    std::string labels;
    std::string model;
    std::string budgets = "15:35";
    int repeats = 5;
    GbrtHyper hyper;
};

void emit(const fs::path& path, const std::string& text, std::ostream& out) {
    if (path.empty())
        out << text;
    else
        io::write_file_atomic(path, text);
}

std::string strip_suffix(std::string name, std::string_view suffix) {
    if (name.size() >= suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
        name.resize(name.size() - suffix.size());
    return name;
}

std::vector<fs::path> sorted_files(const fs::path& dir, std::string_view suffix, std::string_view reject_suffix = {}) {
    if (!fs::is_directory(dir)) fail(ErrorCode::MissingFile, "not a directory: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string name = entry.path().filename().string();
        if (!name.ends_with(suffix)) continue;
        if (!reject_suffix.empty() && name.ends_with(reject_suffix)) continue;
        files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

PipelineParams pipeline_from(const Options& o) {
    PipelineParams p = o.pipeline;
    p.cac_window = o.cac_window;
    p.exclusion_radius = o.exclusion;
    p.threads = std::max(1u, o.jobs);
    return p;
}

LoadOverrides overrides_from(const Options& o) { return {o.cell_id, o.q_nom}; }

// Features CSV: cell_id followed by the six named features.
std::string features_csv(const std::vector<std::pair<std::string, FeatureVector>>& rows) {
    std::ostringstream out;
    out << "cell_id";
    for (auto name : FeatureVector::kNames) out << ',' << name;
    out << '\n';
    for (const auto& [id, f] : rows) {
        out << id;
        for (double v : f.to_array()) out << ',' << io::format_double(v);
        out << '\n';
    }
    return out.str();
}

std::vector<std::pair<std::string, std::vector<double>>> read_features(const fs::path& path) {
    const auto text = io::read_file(path);
    const auto lines = io::split_lines(text);
    if (lines.empty() || !io::trim(lines.front()).starts_with("cell_id,"))
        fail(ErrorCode::MissingColumn, path.string() + ": expected a header starting with 'cell_id,'");
    const std::size_t width = io::split_fields(lines.front()).size() - 1;
    std::vector<std::pair<std::string, std::vector<double>>> rows;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (io::trim(lines[i]).empty()) continue;
        const auto f = io::split_fields(lines[i]);
        if (f.size() != width + 1) fail(ErrorCode::ParseError, path.string() + ": wrong field count at line " + std::to_string(i + 1));
        std::vector<double> x(width);
        for (std::size_t k = 0; k < width; ++k)
            if (!io::parse_double(f[k + 1], x[k]))
                fail(ErrorCode::ParseError, path.string() + ": bad number at line " + std::to_string(i + 1));
        rows.emplace_back(std::string(io::trim(f[0])), std::move(x));
    }
    return rows;
}

std::map<std::string, double> read_labels(const fs::path& path) {
    const auto text = io::read_file(path);
    const auto lines = io::split_lines(text);
    if (lines.empty() || io::trim(lines.front()) != "cell_id,onset_cycle")
        fail(ErrorCode::MissingColumn, path.string() + ": expected header 'cell_id,onset_cycle'");
    std::map<std::string, double> labels;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (io::trim(lines[i]).empty()) continue;
        const auto f = io::split_fields(lines[i]);
        double v = 0.0;
        if (f.size() != 2 || !io::parse_double(f[1], v))
            fail(ErrorCode::ParseError, path.string() + ": malformed row at line " + std::to_string(i + 1));
        labels[std::string(io::trim(f[0]))] = v;
    }
    return labels;
}

std::string labels_csv(const std::vector<FleetCell>& cells) {
    std::ostringstream out;
    out << "cell_id,onset_cycle\n";
    for (const auto& c : cells) out << c.cell_id << ',' << io::format_double(c.onset_cycle) << '\n';
    return out.str();
}

std::vector<int> parse_budgets(const std::string& spec) {
    std::vector<int> out;
    long long a = 0, b = 0;
    if (auto colon = spec.find(':'); colon != std::string::npos) {
        if (!io::parse_int(std::string_view(spec).substr(0, colon), a) ||
            !io::parse_int(std::string_view(spec).substr(colon + 1), b) || b < a)
            fail(ErrorCode::InvalidArgument, "budgets must look like 15:35");
        for (long long v = a; v <= b; ++v) out.push_back(static_cast<int>(v));
        return out;
    }
    for (auto field : io::split_fields(spec)) {
        if (!io::parse_int(field, a)) fail(ErrorCode::InvalidArgument, "bad budget '" + std::string(field) + "'");
        out.push_back(static_cast<int>(a));
    }
    return out;
}

std::vector<FleetCell> load_fleet_dir(const fs::path& dir) {
    const auto labels = read_labels(dir / "labels.csv");
    std::vector<FleetCell> cells;
    for (const auto& file : sorted_files(dir, ".cycles.csv")) {
        FleetCell cell;
        cell.cell_id = strip_suffix(file.filename().string(), ".cycles.csv");
        auto it = labels.find(cell.cell_id);
        if (it == labels.end()) fail(ErrorCode::MissingMetadata, "no onset label for " + cell.cell_id);
        cell.onset_cycle = it->second;
        cell.records = load_cycle_csv(file);
        cells.push_back(std::move(cell));
    }
    if (cells.empty()) fail(ErrorCode::MissingFile, "no *.cycles.csv files in " + dir.string());
    return cells;
}

int cmd_identify(const Options& o, std::ostream& out) {
    const auto series = load_capacity_csv(o.input, overrides_from(o));
    emit(o.out, knee_report_json(identify_knees(series, pipeline_from(o))), out);
    return Ok;
}

int cmd_baconwatts(const Options& o, std::ostream& out) {
    const auto series = load_capacity_csv(o.input, overrides_from(o));
    emit(o.out, knee_report_json(identify_knees_dbw(series, o.dbw, pipeline_from(o))), out);
    return Ok;
}

int cmd_batch(const Options& o, std::ostream& out) {
    std::vector<CapacityFadeSeries> cells;
    for (const auto& file : sorted_files(o.dir, ".csv", ".cycles.csv")) {
        if (file.filename() == "labels.csv" || file.filename().string().starts_with("scatter_") ||
            file.filename() == "batch.csv")
            continue;
        cells.push_back(load_capacity_csv(file, {std::nullopt, o.q_nom}));
    }
    if (cells.empty()) fail(ErrorCode::MissingFile, "no capacity CSV files in " + o.dir);

    BatchOptions bo;
    bo.methods.clear();
    for (auto name : io::split_fields(o.methods)) {
        const auto m = parse_method(io::trim(name));
        if (!m) fail(ErrorCode::InvalidArgument, "unknown method '" + std::string(name) + "'");
        if (std::find(bo.methods.begin(), bo.methods.end(), *m) == bo.methods.end()) bo.methods.push_back(*m);
    }
    bo.pipeline = pipeline_from(o);
    bo.pipeline.threads = 1;
    bo.dbw = o.dbw;
    bo.jobs = std::max(1u, o.jobs);
    const auto result = batch_report(cells, bo);
    const std::string table = batch_csv(result);

    const fs::path target = o.out;
    if (target.empty()) {
        out << table;
    } else if (target.extension() == ".csv") {
        io::write_file_atomic(target, table);
    } else {
        io::write_file_atomic(target / "batch.csv", table);
        write_scatter_files(target, result);
    }
    return Ok;
}

int cmd_synth(const Options& o, std::ostream&) {
    const fs::path dir = o.out_dir;
    if (o.cycle_records) {
        const auto fleet = simulate_fleet(o.count, o.seed);
        for (const auto& cell : fleet) write_cycle_csv(dir / (cell.cell_id + ".cycles.csv"), cell.records);
        io::write_file_atomic(dir / "labels.csv", labels_csv(fleet));
        return Ok;
    }
    std::vector<SyntheticCurve> curves;
    if (o.family == "knee")
        curves = generate_knee_family(o.count, o.seed, o.noise, o.n_cycles);
    else if (o.family == "convex")
        curves = generate_convex_family(o.count, o.seed, o.noise);
    else if (o.family == "eol")
        curves = generate_eol_linked_fleet(o.count, o.seed).curves;
    else
        fail(ErrorCode::InvalidArgument, "unknown family '" + o.family + "' (knee, convex, eol)");
    for (const auto& c : curves) {
        const auto stem = dir / c.series.cell_id;
        write_capacity_csv(fs::path(stem.string() + ".csv"), c.series);
        write_metadata(fs::path(stem.string() + ".meta.json"), c.series);
        io::write_file_atomic(fs::path(stem.string() + ".truth.json"), truth_to_json(c));
    }
    return Ok;
}

int cmd_features(const Options& o, std::ostream& out) {
    std::vector<std::pair<std::string, FeatureVector>> rows;
    std::vector<std::string> files = o.cycle_files;
    if (!o.dir.empty())
        for (const auto& f : sorted_files(o.dir, ".cycles.csv")) files.push_back(f.string());
    if (files.empty()) fail(ErrorCode::MissingFile, "no cycle-detail files given (--cycles or --dir)");
    for (const auto& file : files) {
        const fs::path p = file;
        rows.emplace_back(strip_suffix(strip_suffix(p.filename().string(), ".csv"), ".cycles"),
                          extract_features(load_cycle_csv(p), o.budget));
    }
    emit(o.out, features_csv(rows), out);
    return Ok;
}

int cmd_train(const Options& o, std::ostream& out) {
    const auto rows = read_features(o.features);
    const auto labels = read_labels(o.labels);
    FeatureMatrix X;
    std::vector<double> y;
    for (const auto& [id, x] : rows) {
        auto it = labels.find(id);
        if (it == labels.end()) fail(ErrorCode::MissingMetadata, "no label for " + id);
        X.push_back(x);
        y.push_back(it->second);
    }
    emit(o.out, model_to_json(gbrt_train(X, y, o.hyper)), out);
    return Ok;
}

int cmd_predict(const Options& o, std::ostream& out) {
    const auto model = model_from_json(io::read_file(o.model));
    std::ostringstream text;
    text << "cell_id,predicted_onset_cycle\n";
    for (const auto& [id, x] : read_features(o.features)) text << id << ',' << io::format_double(gbrt_predict(model, x)) << '\n';
    emit(o.out, text.str(), out);
    return Ok;
}

int cmd_sensitivity(const Options& o, std::ostream& out) {
    const auto cells = load_fleet_dir(o.dir);
    const auto budgets = parse_budgets(o.budgets);
    const auto rows = sensitivity_sweep(cells, budgets, o.repeats, o.seed, o.hyper, std::max(1u, o.jobs));
    std::ostringstream text;
    text << "budget,rmse,mape,train_rmse_monotone\n";
    for (const auto& r : rows)
        text << r.budget << ',' << io::format_double(r.rmse) << ',' << io::format_double(r.mape) << ','
             << (r.train_rmse_monotone ? "true" : "false") << '\n';
    emit(o.out, text.str(), out);
    return Ok;
}

// key=value lines become flags for the chosen subcommand unless the flag was given explicitly.
std::vector<std::string> apply_config(std::vector<std::string> args) {
    auto it = std::find_if(args.begin(), args.end(), [](const std::string& a) {
        return a == "--config" || a.starts_with("--config=");
    });
    if (it == args.end()) return args;
    std::string file;
    if (*it == "--config") {
        if (it + 1 == args.end()) fail(ErrorCode::InvalidArgument, "--config needs a file");
        file = *(it + 1);
        it = args.erase(it, it + 2);
    } else {
        file = it->substr(9);
        it = args.erase(it);
    }
    std::set<std::string> given;
    for (const auto& a : args)
        if (a.starts_with("--")) given.insert(a.substr(2, a.find('=') == std::string::npos ? std::string::npos : a.find('=') - 2));

    std::vector<std::string> extra;
    const std::string text = io::read_file(file);
    for (auto line : io::split_lines(text)) {
        line = io::trim(line);
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) fail(ErrorCode::ParseError, "config line without '=': " + std::string(line));
        std::string key(io::trim(line.substr(0, eq)));
        std::replace(key.begin(), key.end(), '_', '-');
        if (given.count(key)) continue;
        extra.push_back("--" + key + "=" + std::string(io::trim(line.substr(eq + 1))));
    }
    // after the subcommand name so subcommand options resolve
    auto sub = std::find_if(args.begin(), args.end(), [](const std::string& a) { return !a.starts_with("-"); });
    args.insert(sub == args.end() ? args.end() : sub + 1, extra.begin(), extra.end());
    return args;
}

void report_error(std::ostream& err, bool json, std::string_view code, const std::string& message, int exit_code) {
    if (json) {
        nlohmann::ordered_json j;
        j["error"] = code;
        j["message"] = message;
        j["exit_code"] = exit_code;
        err << j.dump() << '\n';
    } else {
        err << "knee-scout: " << code << ": " << message << '\n';
    }
}

}  // namespace

int run(std::span<const std::string> raw_args, std::ostream& out, std::ostream& err) {
    const bool json_errors = std::find(raw_args.begin(), raw_args.end(), "--json-errors") != raw_args.end();
    Options o;

    CLI::App app{"Battery knee and knee-onset identification", "knee-scout"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);
    app.footer("--config FILE reads key=value defaults (one per line, # comments); command-line flags win.");
    app.fallthrough();
    app.add_option("--seed", o.seed, "Seed for every random draw")->capture_default_str();
    app.add_option("--jobs", o.jobs, "Worker threads")->capture_default_str();
    app.add_flag("--json-errors", o.json_errors, "Report errors as one-line JSON on stderr");

    auto add_series_input = [&](CLI::App* sub) {
        sub->add_option("--input", o.input, "Capacity CSV")->required();
        sub->add_option("--out", o.out, "Output file (stdout when omitted)");
        sub->add_option("--q-nom", o.q_nom, "Nominal capacity in Ah (overrides the sidecar)");
        sub->add_option("--cell-id", o.cell_id, "Cell identifier (overrides the sidecar)");
    };
    auto add_pipeline = [&](CLI::App* sub) {
        sub->add_option("--sg-window", o.pipeline.sg_window, "Savitzky-Golay window (odd)")->capture_default_str();
        sub->add_option("--sg-order", o.pipeline.sg_order, "Savitzky-Golay polynomial order")->capture_default_str();
        sub->add_option("--curv-window", o.pipeline.curv_window, "Curvature window ws (odd)")->capture_default_str();
        sub->add_option("--mp-window", o.pipeline.mp_window, "Matrix profile window")->capture_default_str();
        sub->add_option("--cac-window", o.cac_window, "Separate window for the segmentation profile");
        sub->add_option("--exclusion", o.exclusion, "Regime boundary exclusion radius in cycles");
        sub->add_option("--eol-threshold", o.pipeline.eol_threshold, "EoL fraction of nominal capacity")->capture_default_str();
    };
    auto add_dbw = [&](CLI::App* sub) {
        sub->add_option("--gamma", o.dbw.gamma, "Transition abruptness in cycles")->capture_default_str();
        sub->add_option("--max-iter", o.dbw.max_iter, "Levenberg-Marquardt iteration cap")->capture_default_str();
    };
    auto add_hyper = [&](CLI::App* sub) {
        sub->add_option("--n-trees", o.hyper.n_trees)->capture_default_str();
        sub->add_option("--learning-rate", o.hyper.learning_rate)->capture_default_str();
        sub->add_option("--max-depth", o.hyper.max_depth)->capture_default_str();
        sub->add_option("--min-leaf", o.hyper.min_leaf)->capture_default_str();
    };

    auto* identify = app.add_subcommand("identify", "Knee-onset and knee from curvature segmentation");
    add_series_input(identify);
    add_pipeline(identify);

    auto* bacon = app.add_subcommand("baconwatts", "Knee-onset and knee from a double Bacon-Watts fit");
    add_series_input(bacon);
    add_dbw(bacon);
    bacon->add_option("--sg-window", o.pipeline.sg_window, "Smoothing window for the EoL estimate")->capture_default_str();
    bacon->add_option("--sg-order", o.pipeline.sg_order)->capture_default_str();
    bacon->add_option("--eol-threshold", o.pipeline.eol_threshold)->capture_default_str();

    auto* batch = app.add_subcommand("batch", "Run both methods over a directory and correlate with EoL");
    batch->add_option("--dir", o.dir, "Directory of capacity CSVs")->required();
    batch->add_option("--out", o.out, "table.csv, or a directory for the table plus scatter files");
    batch->add_option("--methods", o.methods, "Comma list of curvature, baconwatts")->capture_default_str();
    batch->add_option("--q-nom", o.q_nom, "Nominal capacity for cells without a sidecar");
    add_pipeline(batch);
    add_dbw(batch);

    auto* synth = app.add_subcommand("synth", "Write synthetic capacity curves with ground truth");
    synth->add_option("--count", o.count, "Number of curves")->capture_default_str();
    synth->add_option("--out-dir", o.out_dir, "Output directory")->required();
    synth->add_option("--family", o.family, "knee, convex or eol")->capture_default_str();
    synth->add_option("--noise", o.noise, "White noise std on normalized capacity")->capture_default_str();
    synth->add_option("--n-cycles", o.n_cycles, "Cycles per knee-family curve")->capture_default_str();
    synth->add_flag("--cycle-records", o.cycle_records, "Write early-cycle discharge records and labels instead");

    auto* features = app.add_subcommand("features", "Extract the six early-cycle features");
    features->add_option("--cycles", o.cycle_files, "Cycle-detail CSV (repeatable)");
    features->add_option("--dir", o.dir, "Directory of *.cycles.csv files");
    features->add_option("--budget", o.budget, "Late ΔQ anchor and capacity window")->capture_default_str();
    features->add_option("--out", o.out, "Features CSV (stdout when omitted)");

    auto* train = app.add_subcommand("train", "Fit the boosted-tree onset model");
    train->add_option("--features", o.features)->required();
    train->add_option("--labels", o.labels, "CSV with cell_id,onset_cycle")->required();
    train->add_option("--out", o.out, "Model JSON")->required();
    add_hyper(train);

    auto* predict = app.add_subcommand("predict", "Predict knee-onset cycles");
    predict->add_option("--model", o.model)->required();
    predict->add_option("--features", o.features)->required();
    predict->add_option("--out", o.out, "Predictions CSV (stdout when omitted)");

    auto* sens = app.add_subcommand("sensitivity", "Prediction error against cycle budget");
    sens->add_option("--dir", o.dir, "Directory with *.cycles.csv and labels.csv")->required();
    sens->add_option("--budgets", o.budgets, "first:last or a comma list")->capture_default_str();
    sens->add_option("--repeats", o.repeats, "Stratified splits per budget")->capture_default_str();
    sens->add_option("--out", o.out, "Sweep CSV (stdout when omitted)");
    add_hyper(sens);

    std::vector<std::string> args;
    try {
        args = apply_config(std::vector<std::string>(raw_args.begin(), raw_args.end()));
    } catch (const Error& e) {
        report_error(err, json_errors, to_string(e.code()), e.what(), InputError);
        return InputError;
    }

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return Ok;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return Ok;
    } catch (const CLI::CallForVersion&) {
        out << "knee-scout " << kVersion << '\n';
        return Ok;
    } catch (const CLI::ParseError& e) {
        const bool unknown_sub = !args.empty() && !args.front().starts_with("-") && app.get_subcommands().empty();
        report_error(err, json_errors, unknown_sub ? "UnknownSubcommand" : "UsageError", e.what(), InputError);
        if (!json_errors) err << app.help();
        return InputError;
    }

    try {
        const auto* sub = app.get_subcommands().front();
        const std::string name = sub->get_name();
        if (name == "identify") return cmd_identify(o, out);
        if (name == "baconwatts") return cmd_baconwatts(o, out);
        if (name == "batch") return cmd_batch(o, out);
        if (name == "synth") return cmd_synth(o, out);
        if (name == "features") return cmd_features(o, out);
        if (name == "train") return cmd_train(o, out);
        if (name == "predict") return cmd_predict(o, out);
        if (name == "sensitivity") return cmd_sensitivity(o, out);
        report_error(err, json_errors, "UnknownSubcommand", name, InputError);
        return InputError;
    } catch (const Error& e) {
        const int code = is_numerical(e.code()) ? NumericalFailure : InputError;
        report_error(err, json_errors, to_string(e.code()), e.what(), code);
        return code;
    } catch (const fs::filesystem_error& e) {
        report_error(err, json_errors, "MissingFile", e.what(), InputError);
        return InputError;
    } catch (const std::exception& e) {
        report_error(err, json_errors, "InternalError", e.what(), NumericalFailure);
        return NumericalFailure;
    }
}

}  // namespace kneescout::cli
