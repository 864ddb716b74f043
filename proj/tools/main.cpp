// procal: proper calibration error, refinement, and sharpness estimation on
// the probability simplex, plus post-hoc recalibration and a synthetic
// miscalibration oracle.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "procal/calibrate.hpp"
#include "procal/estimator.hpp"
#include "procal/io.hpp"
#include "procal/kernel.hpp"
#include "procal/parallel.hpp"
#include "procal/synth.hpp"

namespace {

using nlohmann::json;
using namespace procal;

constexpr int kSchemaVersion = 1;

struct OutputOpts {
    std::string path = "-";
    std::string format = "table";
};

void write_text(const std::string& path, const std::string& text) {
    if (path == "-" || path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path);
    out << text;
}

std::string render_json(const json& doc) { return doc.dump(2) + "\n"; }

// Flat key/value table for humans.
std::string render_table(const std::vector<std::pair<std::string, std::string>>& rows) {
    std::size_t width = 0;
    for (const auto& [k, v] : rows) width = std::max(width, k.size());
    std::ostringstream out;
    for (const auto& [k, v] : rows) {
        out << k;
        out << std::string(width - k.size() + 2, ' ');
        out << v << '\n';
    }
    return out.str();
}

std::string csv_escape(const std::string& s) { return s; }

std::string render_csv(const std::vector<std::string>& header,
                       const std::vector<std::vector<std::string>>& rows) {
    std::ostringstream out;
    for (std::size_t c = 0; c < header.size(); ++c)
        out << csv_escape(header[c]) << (c + 1 < header.size() ? ',' : '\n');
    for (const auto& row : rows)
        for (std::size_t c = 0; c < row.size(); ++c)
            out << csv_escape(row[c]) << (c + 1 < row.size() ? ',' : '\n');
    return out.str();
}

std::string fmt(double v) { return format_double(v); }

// ---------------------------------------------------------------------------
// Kernel options shared by the estimating subcommands.

struct KernelOpts {
    std::string kernel = "dirichlet";
    double bandwidth = 0.0;  // 0 = select by LOO-MLE
    bool bandwidth_given = false;
    std::vector<double> grid;
    int bins = 15;
    bool bins_given = false;
    bool include_diagonal = false;
    std::size_t materialize_cap = kDefaultMaterializeCap;

    void attach(CLI::App* cmd) {
        cmd->add_option("--kernel", kernel, "Kernel for the conditional expectation")
            ->check(CLI::IsMember({"dirichlet", "binning"}))
            ->capture_default_str();
        cmd->add_option("--bandwidth", bandwidth,
                        "Dirichlet bandwidth; omit to select by leave-one-out MLE")
            ->check(CLI::PositiveNumber);
        cmd->add_option("--grid", grid, "Bandwidth grid for the LOO-MLE selection")
            ->delimiter(',');
        cmd->add_option("--bins", bins, "Bins per axis for the binning kernel")
            ->check(CLI::PositiveNumber);
        cmd->add_flag("--include-diagonal", include_diagonal,
                      "Include each point in its own conditional-expectation estimate");
        cmd->add_option("--materialize-cap", materialize_cap,
                        "Largest n for which the full weight matrix is kept in memory")
            ->capture_default_str();
    }

    void finalize(const CLI::App* cmd) {
        bandwidth_given = cmd->count("--bandwidth") > 0;
        bins_given = cmd->count("--bins") > 0;
        if (kernel == "dirichlet" && bins_given)
            throw InputError("--bins only applies to --kernel binning");
        if (kernel == "binning" && (bandwidth_given || cmd->count("--grid") > 0))
            throw InputError("--bandwidth/--grid only apply to --kernel dirichlet");
    }

    // Resolves the kernel against a concrete dataset, running the bandwidth
    // selection when needed. Returns the spec and a source tag for the report.
    std::pair<KernelSpec, std::string> resolve(const LabeledPredictions& dataset) {
        if (kernel == "binning") return {BinningKernel{bins}, "user"};
        if (bandwidth_given) return {DirichletKernel{bandwidth}, "user"};
        const auto g = grid.empty() ? default_bandwidth_grid() : grid;
        return {DirichletKernel{bandwidth_loo_mle(dataset, g)}, "loo-mle"};
    }

    EstimatorOptions estimator_options(const KernelSpec& spec) const {
        return {spec, !include_diagonal, materialize_cap};
    }

    json describe_resolved(const KernelSpec& spec, const std::string& source) const {
        json out;
        if (const auto* d = std::get_if<DirichletKernel>(&spec)) {
            out["type"] = "dirichlet";
            out["bandwidth"] = d->bandwidth;
            out["bandwidth_source"] = source;
        } else {
            out["type"] = "binning";
            out["bins"] = std::get<BinningKernel>(spec).bins_per_axis;
        }
        out["leave_one_out"] = !include_diagonal;
        out["clamp_eps"] = kLogClampEps;
        out["materialize_cap"] = materialize_cap;
        return out;
    }
};

const ConvexGenerator& binary_generator_for(const std::string& metric) {
    if (metric == "kl") return generator_by_name("binary-entropy");
    if (metric == "brier") return generator_by_name("binary-brier");
    return generator_by_name(metric);
}

// ---------------------------------------------------------------------------
// eval

struct EvalOpts {
    std::string input;
    std::vector<std::string> metrics{"kl", "brier"};
    std::string mode = "canonical";
    KernelOpts kernel;
    OutputOpts out;
    std::uint64_t seed = 0;
};

void run_eval(EvalOpts& opt) {
    const auto dataset = load_predictions(opt.input);
    json doc{{"schema", kSchemaVersion},
             {"command", "eval"},
             {"input", opt.input},
             {"n", dataset.size()},
             {"k", dataset.prediction_dim()},
             {"mode", opt.mode},
             {"seed", opt.seed}};
    std::vector<std::pair<std::string, std::string>> table;
    std::vector<std::string> csv_header;
    std::vector<std::vector<std::string>> csv_rows;

    if (opt.mode == "toplabel") {
        if (opt.kernel.kernel != "binning")
            throw InputError("--mode toplabel needs --kernel binning");
        const double value = binned_toplabel_ece(dataset, opt.kernel.bins);
        doc["kernel"] = {{"type", "binning"}, {"bins", opt.kernel.bins}};
        doc["metrics"] = json::array({{{"metric", "toplabel-ece"}, {"value", value}}});
        table.emplace_back("toplabel-ece", fmt(value));
        csv_header = {"metric", "value"};
        csv_rows.push_back({"toplabel-ece", fmt(value)});
    } else if (opt.mode == "classwise") {
        json metrics = json::array();
        csv_header = {"metric", "class", "value"};
        for (const auto& metric : opt.metrics) {
            if (metric == "ce1") {
                if (opt.kernel.kernel != "binning")
                    throw InputError("--metric ce1 needs --kernel binning");
                const double value = binned_classwise_ce1(dataset, opt.kernel.bins);
                metrics.push_back({{"metric", "classwise-ce1"},
                                   {"bins", opt.kernel.bins},
                                   {"value", value}});
                table.emplace_back("classwise-ce1", fmt(value));
                csv_rows.push_back({"classwise-ce1", "mean", fmt(value)});
                continue;
            }
            const auto& gen = binary_generator_for(metric);
            auto [spec, source] = opt.kernel.resolve(dataset);
            const auto report = classwise_ce(dataset, gen, opt.kernel.estimator_options(spec));
            doc["kernel"] = opt.kernel.describe_resolved(spec, source);
            metrics.push_back({{"generator", gen.name},
                               {"ce_mean", report.mean},
                               {"ce_per_class", report.per_class}});
            table.emplace_back("classwise-ce[" + gen.name + "]", fmt(report.mean));
            csv_rows.push_back({gen.name, "mean", fmt(report.mean)});
            for (std::size_t c = 0; c < report.per_class.size(); ++c)
                csv_rows.push_back({gen.name, std::to_string(c), fmt(report.per_class[c])});
        }
        doc["metrics"] = metrics;
    } else if (opt.mode == "canonical") {
        auto [spec, source] = opt.kernel.resolve(dataset);
        doc["kernel"] = opt.kernel.describe_resolved(spec, source);
        const auto options = opt.kernel.estimator_options(spec);
        json metrics = json::array();
        csv_header = {"generator", "risk", "ce", "ce_via_risk", "refinement", "sharpness"};
        for (const auto& metric : opt.metrics) {
            const auto& gen = generator_by_name(metric);
            if (options.leave_one_out) {
                const auto r = decompose(dataset, gen, options);
                metrics.push_back({{"generator", gen.name},
                                   {"risk", r.risk},
                                   {"ce", r.calibration_error},
                                   {"ce_via_risk", r.ce_via_risk},
                                   {"refinement", r.refinement},
                                   {"sharpness", r.sharpness}});
                table.emplace_back("risk[" + gen.name + "]", fmt(r.risk));
                table.emplace_back("ce[" + gen.name + "]", fmt(r.calibration_error));
                table.emplace_back("ce_via_risk[" + gen.name + "]", fmt(r.ce_via_risk));
                table.emplace_back("refinement[" + gen.name + "]", fmt(r.refinement));
                table.emplace_back("sharpness[" + gen.name + "]", fmt(r.sharpness));
                csv_rows.push_back({gen.name, fmt(r.risk), fmt(r.calibration_error),
                                    fmt(r.ce_via_risk), fmt(r.refinement), fmt(r.sharpness)});
            } else {
                // Diagonal-inclusive weighting only defines the direct path.
                const double ce = ce_direct(dataset, gen, options);
                const double risk = empirical_risk(dataset, gen);
                metrics.push_back({{"generator", gen.name}, {"risk", risk}, {"ce", ce}});
                table.emplace_back("risk[" + gen.name + "]", fmt(risk));
                table.emplace_back("ce[" + gen.name + "]", fmt(ce));
                csv_rows.push_back({gen.name, fmt(risk), fmt(ce), "", "", ""});
            }
        }
        doc["metrics"] = metrics;
    } else {
        throw InputError("unknown mode '" + opt.mode + "'");
    }

    if (opt.out.format == "json")
        write_text(opt.out.path, render_json(doc));
    else if (opt.out.format == "csv")
        write_text(opt.out.path, render_csv(csv_header, csv_rows));
    else
        write_text(opt.out.path, render_table(table));
}

// ---------------------------------------------------------------------------
// sweep

struct SweepOpts {
    int k = 10;
    double t1 = 0.9;
    double t2 = 0.6;
    std::vector<std::size_t> n_grid{100, 500, 1000, 3000, 5000, 8000};
    int seeds = 20;
    std::string metric = "kl";
    KernelOpts kernel;
    std::size_t oracle_draws = 1000000;
    std::uint64_t oracle_seed = 990001;
    std::string per_seed_output;
    OutputOpts out;
    std::uint64_t seed = 0;
};

void run_sweep(SweepOpts& opt) {
    const auto& gen = generator_by_name(opt.metric);
    SynthConfig oracle_config{1, opt.k, opt.t1, opt.t2, 0};
    const auto oracle = ground_truth_ce(oracle_config, gen, opt.oracle_draws, opt.oracle_seed);

    struct Cell {
        double estimate = 0.0;
        double bandwidth = 0.0;
    };
    std::vector<std::vector<Cell>> cells(opt.n_grid.size());
    for (auto& row : cells) row.resize(static_cast<std::size_t>(opt.seeds));

    for (std::size_t ni = 0; ni < opt.n_grid.size(); ++ni) {
        detail::parallel_for(0, static_cast<std::size_t>(opt.seeds), [&](std::size_t si) {
            SynthConfig config{opt.n_grid[ni], opt.k, opt.t1, opt.t2, opt.seed + si};
            const auto dataset = to_labeled_predictions(generate(config));
            auto kernel_opts = opt.kernel;  // per-task copy; resolve() mutates nothing shared
            auto [spec, source] = kernel_opts.resolve(dataset);
            const double estimate =
                ce_direct(dataset, gen, kernel_opts.estimator_options(spec));
            Cell cell;
            cell.estimate = estimate;
            if (const auto* d = std::get_if<DirichletKernel>(&spec)) cell.bandwidth = d->bandwidth;
            cells[ni][si] = cell;
        });
    }

    json rows = json::array();
    std::vector<std::string> header{"n",           "seeds",        "mean_estimate",
                                    "stderr_estimate", "mean_abs_bias", "oracle",
                                    "oracle_stderr"};
    std::vector<std::vector<std::string>> csv_rows;
    std::vector<std::pair<std::string, std::string>> table;
    for (std::size_t ni = 0; ni < opt.n_grid.size(); ++ni) {
        double mean = 0.0;
        double abs_bias = 0.0;
        for (const auto& c : cells[ni]) {
            mean += c.estimate;
            abs_bias += std::abs(c.estimate - oracle.value);
        }
        mean /= opt.seeds;
        abs_bias /= opt.seeds;
        double var = 0.0;
        for (const auto& c : cells[ni]) var += (c.estimate - mean) * (c.estimate - mean);
        const double stderr_est = opt.seeds > 1
                                      ? std::sqrt(var / (opt.seeds - 1) / opt.seeds)
                                      : 0.0;
        rows.push_back({{"n", opt.n_grid[ni]},
                        {"seeds", opt.seeds},
                        {"mean_estimate", mean},
                        {"stderr_estimate", stderr_est},
                        {"mean_abs_bias", abs_bias},
                        {"oracle", oracle.value},
                        {"oracle_stderr", oracle.std_error}});
        csv_rows.push_back({std::to_string(opt.n_grid[ni]), std::to_string(opt.seeds), fmt(mean),
                            fmt(stderr_est), fmt(abs_bias), fmt(oracle.value),
                            fmt(oracle.std_error)});
        table.emplace_back("n=" + std::to_string(opt.n_grid[ni]),
                           "mean " + fmt(mean) + "  |bias| " + fmt(abs_bias));
    }

    if (!opt.per_seed_output.empty()) {
        std::vector<std::vector<std::string>> seed_rows;
        for (std::size_t ni = 0; ni < opt.n_grid.size(); ++ni)
            for (std::size_t si = 0; si < cells[ni].size(); ++si)
                seed_rows.push_back({std::to_string(opt.n_grid[ni]), std::to_string(si),
                                     fmt(cells[ni][si].estimate),
                                     fmt(std::abs(cells[ni][si].estimate - oracle.value)),
                                     fmt(cells[ni][si].bandwidth)});
        write_text(opt.per_seed_output,
                   render_csv({"n", "seed", "estimate", "abs_bias", "bandwidth"}, seed_rows));
    }

    json doc{{"schema", kSchemaVersion},
             {"command", "sweep"},
             {"generator", gen.name},
             {"k", opt.k},
             {"t1", opt.t1},
             {"t2", opt.t2},
             {"seeds", opt.seeds},
             {"base_seed", opt.seed},
             {"oracle",
              {{"value", oracle.value},
               {"std_error", oracle.std_error},
               {"draws", oracle.draws},
               {"seed", opt.oracle_seed}}},
             {"rows", rows}};
    if (opt.out.format == "json")
        write_text(opt.out.path, render_json(doc));
    else if (opt.out.format == "csv")
        write_text(opt.out.path, render_csv(header, csv_rows));
    else
        write_text(opt.out.path, render_table(table));
}

// ---------------------------------------------------------------------------
// calibrate

struct CalibrateFitOpts {
    std::string method = "temperature";
    std::string input;
    std::string model_path = "model.json";
    OutputOpts out;
};

void run_calibrate_fit(CalibrateFitOpts& opt) {
    const auto validation = load_predictions(opt.input);
    json doc{{"schema", kSchemaVersion}, {"command", "calibrate-fit"}, {"input", opt.input}};
    if (opt.method == "temperature") {
        const auto fit = temperature_fit(validation);
        save_model(opt.model_path, CalibrationModel{fit.model});
        doc["model"] = {{"type", "temperature"}, {"T", fit.model.temperature}};
        doc["nll"] = fit.nll;
        if (fit.degenerate_labels) {
            doc["warning"] = "single label class present; NLL is monotone in T, returning the "
                             "better bracket endpoint";
            std::cerr << "warning: " << doc["warning"].get<std::string>() << '\n';
        }
    } else if (opt.method == "isotonic") {
        const auto model = isotonic_fit(validation);
        save_model(opt.model_path, CalibrationModel{model});
        doc["model"] = {{"type", "isotonic"}, {"classes", model.classes.size()}};
    } else {
        throw InputError("unknown calibration method '" + opt.method + "'");
    }
    doc["model_path"] = opt.model_path;
    write_text(opt.out.path, render_json(doc));
}

struct CalibrateApplyOpts {
    std::string model_path;
    std::string input;
    std::string output_file = "calibrated.csv";
    bool report_change = false;
    std::string metric = "kl";
    KernelOpts kernel;
    OutputOpts out;
};

void run_calibrate_apply(CalibrateApplyOpts& opt) {
    const auto model = load_model(opt.model_path);
    const auto before = load_predictions(opt.input);
    const auto after = apply_model(model, before);
    save_predictions(opt.output_file, after);

    json doc{{"schema", kSchemaVersion},
             {"command", "calibrate-apply"},
             {"input", opt.input},
             {"model_path", opt.model_path},
             {"output_file", opt.output_file}};
    if (opt.report_change) {
        const auto& gen = generator_by_name(opt.metric);
        auto [spec_before, src_b] = opt.kernel.resolve(before);
        const double ce_before =
            ce_direct(before, gen, opt.kernel.estimator_options(spec_before));
        auto [spec_after, src_a] = opt.kernel.resolve(after);
        const double ce_after = ce_direct(after, gen, opt.kernel.estimator_options(spec_after));
        const double change = (ce_after - ce_before) / ce_before * 100.0;
        doc["ce_before"] = ce_before;
        doc["ce_after"] = ce_after;
        doc["change_percent"] = change;
        std::ostringstream note;
        note << gen.name << " CE " << fmt(ce_before) << " -> " << fmt(ce_after) << " ("
             << (change >= 0 ? "+" : "") << change << " %)";
        doc["note"] = note.str();
    }
    write_text(opt.out.path, render_json(doc));
}

// ---------------------------------------------------------------------------
// bandwidth

struct BandwidthOpts {
    std::string input;
    std::vector<double> grid;
    OutputOpts out;
};

void run_bandwidth(BandwidthOpts& opt) {
    const auto dataset = load_predictions(opt.input);
    const auto grid = opt.grid.empty() ? default_bandwidth_grid() : opt.grid;
    const auto scores = loo_mle_scores(dataset, grid);
    const double winner = bandwidth_loo_mle(dataset, grid);

    double best_ll = scores.front().log_likelihood;
    for (const auto& s : scores) best_ll = std::max(best_ll, s.log_likelihood);
    std::size_t at_best = 0;
    for (const auto& s : scores)
        if (s.log_likelihood == best_ll) ++at_best;

    json rows = json::array();
    std::vector<std::vector<std::string>> csv_rows;
    std::vector<std::pair<std::string, std::string>> table;
    for (const auto& s : scores) {
        rows.push_back({{"bandwidth", s.bandwidth}, {"log_likelihood", s.log_likelihood}});
        csv_rows.push_back({fmt(s.bandwidth), fmt(s.log_likelihood)});
        table.emplace_back("h=" + fmt(s.bandwidth), fmt(s.log_likelihood));
    }
    table.emplace_back("selected", fmt(winner));
    json doc{{"schema", kSchemaVersion},
             {"command", "bandwidth"},
             {"input", opt.input},
             {"selected", winner},
             {"scores", rows}};
    if (at_best > 1) doc["note"] = "tie between " + std::to_string(at_best) +
                                   " candidates; the smallest bandwidth wins";
    if (opt.out.format == "json")
        write_text(opt.out.path, render_json(doc));
    else if (opt.out.format == "csv")
        write_text(opt.out.path, render_csv({"bandwidth", "log_likelihood"}, csv_rows));
    else
        write_text(opt.out.path, render_table(table));
}

// ---------------------------------------------------------------------------
// synth

struct SynthOpts {
    std::size_t n = 1000;
    int k = 2;
    double t1 = 0.9;
    double t2 = 0.6;
    std::uint64_t seed = 0;
    std::string output = "synth.csv";
    std::string truth_output;
    std::string oracle_output;
    std::size_t oracle_draws = 1000000;
    std::uint64_t oracle_seed = 990001;
    OutputOpts out;
};

void run_synth(SynthOpts& opt) {
    SynthConfig config{opt.n, opt.k, opt.t1, opt.t2, opt.seed};
    const auto samples = generate(config);
    const auto dataset = to_labeled_predictions(samples);
    save_predictions(opt.output, dataset);
    const std::string truth_path =
        opt.truth_output.empty() ? opt.output + ".truth.csv" : opt.truth_output;
    save_truth(truth_path, truth_matrix(samples));

    json doc{{"schema", kSchemaVersion}, {"command", "synth"},
             {"n", opt.n},          {"k", opt.k},
             {"t1", opt.t1},        {"t2", opt.t2},
             {"seed", opt.seed},    {"output", opt.output},
             {"truth_output", truth_path}};

    if (!opt.oracle_output.empty()) {
        json entries = json::array();
        for (const char* name : {"kl", "brier"}) {
            const auto est =
                ground_truth_ce(config, generator_by_name(name), opt.oracle_draws, opt.oracle_seed);
            entries.push_back({{"k", opt.k},
                               {"t1", opt.t1},
                               {"t2", opt.t2},
                               {"generator", name},
                               {"value", est.value},
                               {"std_error", est.std_error},
                               {"std_dev", est.std_dev}});
        }
        json fixture{{"schema", kSchemaVersion},
                     {"draws", opt.oracle_draws},
                     {"oracle_seed", opt.oracle_seed},
                     {"entries", entries}};
        write_text(opt.oracle_output, render_json(fixture));
        doc["oracle_output"] = opt.oracle_output;
    }
    write_text(opt.out.path, render_json(doc));
}

// ---------------------------------------------------------------------------
// layer-sharpness

struct LayerSharpnessOpts {
    std::vector<std::string> files;
    std::string metric = "kl";
    double tolerance = 0.02;
    KernelOpts kernel;
    OutputOpts out;
};

void run_layer_sharpness(LayerSharpnessOpts& opt) {
    const auto& gen = generator_by_name(opt.metric);
    std::vector<FeatureTable> tables;
    int class_count = 2;
    for (const auto& file : opt.files) {
        tables.push_back(load_features(file));
        class_count = std::max(class_count, tables.back().class_count);
    }

    json layers = json::array();
    std::vector<double> values;
    std::vector<std::pair<std::string, std::string>> table;
    for (std::size_t i = 0; i < tables.size(); ++i) {
        // The layer features live off the simplex; resolve the kernel against
        // the mapped predictions.
        Matrix preds(tables[i].features.rows(), tables[i].features.cols() + 1);
        for (std::size_t r = 0; r < tables[i].features.rows(); ++r) {
            const auto mapped = softmax_extended(tables[i].features.row(r));
            std::copy(mapped.values().begin(), mapped.values().end(), preds.row(r).begin());
        }
        const LabeledPredictions mapped_dataset(std::move(preds), tables[i].labels, class_count);
        auto kernel_opts = opt.kernel;
        auto [spec, source] = kernel_opts.resolve(mapped_dataset);
        const double value = sharpness(mapped_dataset, gen, kernel_opts.estimator_options(spec));
        values.push_back(value);
        layers.push_back({{"file", opt.files[i]},
                          {"sharpness", value},
                          {"kernel", kernel_opts.describe_resolved(spec, source)}});
        table.emplace_back(opt.files[i], fmt(value));
    }

    json violations = json::array();
    for (std::size_t i = 0; i + 1 < values.size(); ++i) {
        if (values[i + 1] > values[i] + opt.tolerance) {
            violations.push_back({{"from", i},
                                  {"to", i + 1},
                                  {"delta", values[i + 1] - values[i]}});
            table.emplace_back("violation",
                               opt.files[i] + " -> " + opt.files[i + 1] + " (+" +
                                   fmt(values[i + 1] - values[i]) + ")");
        }
    }

    json doc{{"schema", kSchemaVersion},
             {"command", "layer-sharpness"},
             {"generator", gen.name},
             {"tolerance", opt.tolerance},
             {"layers", layers},
             {"violations", violations}};
    if (opt.out.format == "json")
        write_text(opt.out.path, render_json(doc));
    else if (opt.out.format == "csv") {
        std::vector<std::vector<std::string>> rows;
        for (std::size_t i = 0; i < values.size(); ++i)
            rows.push_back({opt.files[i], fmt(values[i])});
        write_text(opt.out.path, render_csv({"file", "sharpness"}, rows));
    } else {
        write_text(opt.out.path, render_table(table));
    }
}

void attach_output(CLI::App* cmd, OutputOpts& out) {
    cmd->add_option("--output,-o", out.path, "Output path, or - for stdout")
        ->capture_default_str();
    cmd->add_option("--format", out.format, "Output format")
        ->check(CLI::IsMember({"json", "csv", "table"}))
        ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Proper calibration error, refinement, and sharpness estimation"};
    app.require_subcommand(1);

    EvalOpts eval_opts;
    auto* eval_cmd = app.add_subcommand("eval", "Estimate CE, refinement, sharpness, and risk");
    eval_cmd->add_option("input", eval_opts.input, "Prediction file (CSV or JSONL)")->required();
    eval_cmd->add_option("--metric", eval_opts.metrics,
                         "Generators to evaluate (kl, brier, binary-*, ce1)")
        ->delimiter(',')
        ->capture_default_str();
    eval_cmd->add_option("--mode", eval_opts.mode, "canonical | classwise | toplabel")
        ->check(CLI::IsMember({"canonical", "classwise", "toplabel"}))
        ->capture_default_str();
    eval_opts.kernel.attach(eval_cmd);
    eval_cmd->add_option("--seed", eval_opts.seed, "Seed echoed into the report");
    attach_output(eval_cmd, eval_opts.out);
    eval_cmd->callback([&] {
        eval_opts.kernel.finalize(eval_cmd);
        run_eval(eval_opts);
    });

    SweepOpts sweep_opts;
    auto* sweep_cmd =
        app.add_subcommand("sweep", "Bias-convergence sweep against the synthetic oracle");
    sweep_cmd->add_option("--k", sweep_opts.k, "Class count")->capture_default_str();
    sweep_cmd->add_option("--t1", sweep_opts.t1, "Calibrated sharpening temperature")
        ->capture_default_str();
    sweep_cmd->add_option("--t2", sweep_opts.t2, "Miscalibration temperature")
        ->capture_default_str();
    sweep_cmd->add_option("--n-grid", sweep_opts.n_grid, "Sample sizes")
        ->delimiter(',')
        ->capture_default_str();
    sweep_cmd->add_option("--seeds", sweep_opts.seeds, "Seeds per sample size")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sweep_cmd->add_option("--metric", sweep_opts.metric, "Generator (kl or brier)")
        ->capture_default_str();
    sweep_opts.kernel.attach(sweep_cmd);
    sweep_cmd->add_option("--oracle-draws", sweep_opts.oracle_draws, "Monte-Carlo oracle draws")
        ->capture_default_str();
    sweep_cmd->add_option("--oracle-seed", sweep_opts.oracle_seed, "Oracle seed")
        ->capture_default_str();
    sweep_cmd->add_option("--per-seed-output", sweep_opts.per_seed_output,
                          "Optional CSV of per-seed rows sorted by (n, seed)");
    sweep_cmd->add_option("--seed", sweep_opts.seed, "Base seed for the evaluation samples");
    attach_output(sweep_cmd, sweep_opts.out);
    sweep_cmd->callback([&] {
        sweep_opts.kernel.finalize(sweep_cmd);
        run_sweep(sweep_opts);
    });

    auto* cal_cmd = app.add_subcommand("calibrate", "Fit or apply a post-hoc calibrator");
    cal_cmd->require_subcommand(1);

    CalibrateFitOpts fit_opts;
    auto* fit_cmd = cal_cmd->add_subcommand("fit", "Fit a calibrator on a validation file");
    fit_cmd->add_option("input", fit_opts.input, "Validation prediction file")->required();
    fit_cmd->add_option("--method", fit_opts.method, "temperature | isotonic")
        ->check(CLI::IsMember({"temperature", "isotonic"}))
        ->capture_default_str();
    fit_cmd->add_option("--model", fit_opts.model_path, "Where to write the model JSON")
        ->capture_default_str();
    attach_output(fit_cmd, fit_opts.out);
    fit_cmd->callback([&] { run_calibrate_fit(fit_opts); });

    CalibrateApplyOpts apply_opts;
    auto* apply_cmd = cal_cmd->add_subcommand("apply", "Apply a fitted calibrator to a file");
    apply_cmd->add_option("input", apply_opts.input, "Prediction file to calibrate")->required();
    apply_cmd->add_option("--model", apply_opts.model_path, "Model JSON from calibrate fit")
        ->required();
    apply_cmd->add_option("--calibrated-output", apply_opts.output_file,
                          "Where to write the calibrated prediction CSV")
        ->capture_default_str();
    apply_cmd->add_flag("--report-change", apply_opts.report_change,
                        "Re-evaluate CE before and after and print the relative change");
    apply_cmd->add_option("--metric", apply_opts.metric, "Generator for --report-change")
        ->capture_default_str();
    apply_opts.kernel.attach(apply_cmd);
    attach_output(apply_cmd, apply_opts.out);
    apply_cmd->callback([&] {
        apply_opts.kernel.finalize(apply_cmd);
        run_calibrate_apply(apply_opts);
    });

    BandwidthOpts bw_opts;
    auto* bw_cmd = app.add_subcommand("bandwidth", "Leave-one-out MLE bandwidth selection");
    bw_cmd->add_option("input", bw_opts.input, "Prediction file")->required();
    bw_cmd->add_option("--grid", bw_opts.grid, "Candidate bandwidths")->delimiter(',');
    attach_output(bw_cmd, bw_opts.out);
    bw_cmd->callback([&] { run_bandwidth(bw_opts); });

    SynthOpts synth_opts;
    auto* synth_cmd =
        app.add_subcommand("synth", "Generate a synthetic miscalibrated prediction file");
    synth_cmd->add_option("--n", synth_opts.n, "Sample count")->capture_default_str();
    synth_cmd->add_option("--k", synth_opts.k, "Class count")->capture_default_str();
    synth_cmd->add_option("--t1", synth_opts.t1, "Calibrated sharpening temperature")
        ->capture_default_str();
    synth_cmd->add_option("--t2", synth_opts.t2, "Miscalibration temperature")
        ->capture_default_str();
    synth_cmd->add_option("--seed", synth_opts.seed, "Sampling seed")->capture_default_str();
    synth_cmd->add_option("--prediction-output", synth_opts.output, "Prediction CSV path")
        ->capture_default_str();
    synth_cmd->add_option("--truth-output", synth_opts.truth_output,
                          "Sidecar truth CSV (default: <prediction-output>.truth.csv)");
    synth_cmd->add_option("--oracle-output", synth_opts.oracle_output,
                          "Write a ground-truth CE fixture JSON for this config");
    synth_cmd->add_option("--oracle-draws", synth_opts.oracle_draws, "Oracle Monte-Carlo draws")
        ->capture_default_str();
    synth_cmd->add_option("--oracle-seed", synth_opts.oracle_seed, "Oracle seed")
        ->capture_default_str();
    attach_output(synth_cmd, synth_opts.out);
    synth_cmd->callback([&] { run_synth(synth_opts); });

    LayerSharpnessOpts layer_opts;
    auto* layer_cmd = app.add_subcommand(
        "layer-sharpness", "Sharpness per feature file; flags non-monotone adjacent pairs");
    layer_cmd->add_option("files", layer_opts.files, "Feature files, one per layer")
        ->required()
        ->expected(-1);
    layer_cmd->add_option("--metric", layer_opts.metric, "Generator (kl or brier)")
        ->capture_default_str();
    layer_cmd->add_option("--tolerance", layer_opts.tolerance,
                          "Allowed sharpness increase between adjacent layers")
        ->capture_default_str();
    layer_opts.kernel.attach(layer_cmd);
    attach_output(layer_cmd, layer_opts.out);
    layer_cmd->callback([&] {
        layer_opts.kernel.finalize(layer_cmd);
        run_layer_sharpness(layer_opts);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const InternalError& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
