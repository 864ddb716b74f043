#include <doctest.h>

#include <cstdlib>
#include <string>

#include <json.hpp>

#include "procal/estimator.hpp"
#include "procal/io.hpp"
#include "testutil.hpp"

#ifndef PROCAL_CLI_PATH
#define PROCAL_CLI_PATH ""
#endif

using namespace procal;
using nlohmann::json;
using testutil::TempDir;

namespace {

struct CliResult {
    int exit_code = -1;
    std::string output;
};

CliResult run_cli(const TempDir& dir, const std::string& args) {
    const auto out_file = dir.path() / "cli_output.txt";
    const std::string cmd =
        std::string(PROCAL_CLI_PATH) + " " + args + " > " + out_file.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    CliResult result;
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    result.output = testutil::read_file(out_file);
    return result;
}

bool have_cli() { return std::string(PROCAL_CLI_PATH).size() > 0; }

}  // namespace

TEST_CASE("synth then eval produces a versioned report") {
    if (!have_cli()) return;
    TempDir dir;
    const auto preds = dir.file("preds.csv").string();
    auto synth = run_cli(dir, "synth --n 300 --k 3 --seed 5 --prediction-output " + preds);
    REQUIRE(synth.exit_code == 0);
    CHECK(std::filesystem::exists(preds));
    CHECK(std::filesystem::exists(preds + ".truth.csv"));

    const auto report = dir.file("report.json").string();
    auto eval = run_cli(dir, "eval " + preds + " --bandwidth 0.02 --format json -o " + report);
    REQUIRE(eval.exit_code == 0);
    const auto doc = json::parse(testutil::read_file(report));
    CHECK(doc["schema"] == 1);
    CHECK(doc["n"] == 300);
    CHECK(doc["k"] == 3);
    CHECK(doc["kernel"]["bandwidth"] == 0.02);
    CHECK(doc["kernel"]["leave_one_out"] == true);
    CHECK(doc["kernel"]["clamp_eps"] == 1e-12);
    REQUIRE(doc["metrics"].size() == 2);

    // The reported KL value equals the library's closed form on the same file.
    const auto ds = load_predictions(preds);
    const EstimatorOptions opts{DirichletKernel{0.02}, true};
    const double closed = ce_kl_closed_form(ds, opts);
    double reported = -1.0;
    for (const auto& m : doc["metrics"])
        if (m["generator"] == "kl") reported = m["ce"].get<double>();
    CHECK(std::abs(reported - closed) <= 1e-10);
}

TEST_CASE("eval classwise and toplabel modes") {
    if (!have_cli()) return;
    TempDir dir;
    const auto preds = dir.file("preds.csv").string();
    REQUIRE(run_cli(dir, "synth --n 200 --k 3 --seed 2 --prediction-output " + preds).exit_code ==
            0);

    auto cw = run_cli(dir, "eval " + preds + " --mode classwise --metric kl --bandwidth 0.02 "
                                             "--format json");
    REQUIRE(cw.exit_code == 0);
    const auto cw_doc = json::parse(cw.output);
    CHECK(cw_doc["metrics"][0]["generator"] == "binary-entropy");
    CHECK(cw_doc["metrics"][0]["ce_per_class"].size() == 3);

    auto top = run_cli(dir, "eval " + preds + " --mode toplabel --kernel binning --bins 15 "
                                              "--format json");
    REQUIRE(top.exit_code == 0);
    const auto top_doc = json::parse(top.output);
    CHECK(top_doc["metrics"][0]["metric"] == "toplabel-ece");
    const auto ds = load_predictions(preds);
    CHECK(top_doc["metrics"][0]["value"].get<double>() ==
          doctest::Approx(binned_toplabel_ece(ds, 15)).epsilon(1e-12));

    auto ce1 = run_cli(dir, "eval " + preds + " --mode classwise --metric ce1 --kernel binning "
                                              "--bins 15 --format json");
    REQUIRE(ce1.exit_code == 0);
    const auto ce1_doc = json::parse(ce1.output);
    CHECK(ce1_doc["metrics"][0]["value"].get<double>() ==
          doctest::Approx(binned_classwise_ce1(ds, 15)).epsilon(1e-12));
}

TEST_CASE("flag inconsistencies exit with code 2") {
    if (!have_cli()) return;
    TempDir dir;
    const auto preds = dir.file("preds.csv").string();
    REQUIRE(run_cli(dir, "synth --n 50 --k 2 --prediction-output " + preds).exit_code == 0);

    CHECK(run_cli(dir, "eval " + preds + " --kernel dirichlet --bins 10").exit_code == 2);
    CHECK(run_cli(dir, "eval " + preds + " --kernel binning --bandwidth 0.1").exit_code == 2);
    CHECK(run_cli(dir, "eval " + preds + " --mode toplabel").exit_code == 2);
    CHECK(run_cli(dir, "eval /nonexistent.csv").exit_code == 2);
    CHECK(run_cli(dir, "eval").exit_code == 2);
    CHECK(run_cli(dir, "--help").exit_code == 0);
}

TEST_CASE("row diagnostics reach the user") {
    if (!have_cli()) return;
    TempDir dir;
    const auto bad = dir.file("bad.csv");
    testutil::write_file(bad, "p_0,p_1,label\n0.5,0.5,0\n0.3,0.7,2\n");
    const auto result = run_cli(dir, "eval " + bad.string());
    CHECK(result.exit_code == 2);
    CHECK(result.output.find("row 3") != std::string::npos);
}

TEST_CASE("bandwidth subcommand reports scores and ties") {
    if (!have_cli()) return;
    TempDir dir;
    const auto preds = dir.file("preds.csv").string();
    REQUIRE(run_cli(dir, "synth --n 150 --k 2 --seed 3 --prediction-output " + preds).exit_code ==
            0);
    auto res = run_cli(dir, "bandwidth " + preds + " --grid 0.01,0.03 --format json");
    REQUIRE(res.exit_code == 0);
    auto doc = json::parse(res.output);
    CHECK(doc["scores"].size() == 2);
    CHECK(doc["selected"].get<double>() > 0.0);

    auto tie = run_cli(dir, "bandwidth " + preds + " --grid 0.01,0.01 --format json");
    REQUIRE(tie.exit_code == 0);
    auto tie_doc = json::parse(tie.output);
    CHECK(tie_doc["selected"] == 0.01);
    CHECK(tie_doc.contains("note"));
}

TEST_CASE("temperature calibration loop reduces the KL CE on over-sharpened data") {
    if (!have_cli()) return;
    TempDir dir;

    // Build an over-sharpened logit file: calibrated probabilities, logits
    // divided by 0.6.
    Rng rng(71);
    const std::size_t n = 3000;
    Matrix logits(n, 3);
    Matrix preds(n, 3);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto p = testutil::random_simplex_point(rng, 3);
        labels[i] = rng.categorical(p);
        for (std::size_t c = 0; c < 3; ++c) logits(i, c) = std::log(p[c]) / 0.6;
        const auto sharpened = softmax(logits.row(i));
        for (std::size_t c = 0; c < 3; ++c) preds(i, c) = sharpened[c];
    }
    LabeledPredictions ds(std::move(preds), std::move(labels), 0, std::move(logits));
    const auto val_file = dir.file("val.csv");
    save_predictions(val_file, ds, /*write_logits=*/true);

    const auto model = dir.file("ts.json").string();
    auto fit = run_cli(dir, "calibrate fit " + val_file.string() + " --method temperature --model " +
                                model);
    REQUIRE(fit.exit_code == 0);
    const auto fitted = json::parse(testutil::read_file(model));
    CHECK(fitted["type"] == "temperature");
    CHECK(std::abs(fitted["T"].get<double>() - 1.0 / 0.6) < 0.15);

    const auto calibrated = dir.file("cal.csv").string();
    auto apply = run_cli(dir, "calibrate apply " + val_file.string() + " --model " + model +
                                  " --calibrated-output " + calibrated +
                                  " --report-change --metric kl --bandwidth 0.02 --format json");
    REQUIRE(apply.exit_code == 0);
    const auto report = json::parse(apply.output);
    CHECK(report["ce_after"].get<double>() <= report["ce_before"].get<double>());
    CHECK(report["change_percent"].get<double>() < 0.0);

    // Applying a T = 1 model is the identity on the file.
    const auto identity_model = dir.file("t1.json");
    testutil::write_file(identity_model, "{\"type\": \"temperature\", \"T\": 1.0}");
    const auto same = dir.file("same.csv").string();
    REQUIRE(run_cli(dir, "calibrate apply " + val_file.string() + " --model " +
                             identity_model.string() + " --calibrated-output " + same)
                .exit_code == 0);
    const auto before = load_predictions(val_file);
    const auto after = load_predictions(same);
    for (std::size_t r = 0; r < before.size(); ++r)
        for (std::size_t c = 0; c < 3; ++c)
            CHECK(std::abs(after.predictions()(r, c) - before.predictions()(r, c)) <= 1e-12);
}

TEST_CASE("isotonic fit on monotone data applies as a near-identity") {
    if (!have_cli()) return;
    TempDir dir;
    const auto preds = dir.file("preds.csv").string();
    REQUIRE(run_cli(dir, "synth --n 500 --k 2 --seed 9 --t2 1.0 --prediction-output " + preds)
                .exit_code == 0);
    const auto model = dir.file("ir.json").string();
    REQUIRE(run_cli(dir, "calibrate fit " + preds + " --method isotonic --model " + model)
                .exit_code == 0);
    const auto out = dir.file("cal.csv").string();
    REQUIRE(run_cli(dir, "calibrate apply " + preds + " --model " + model +
                             " --calibrated-output " + out)
                .exit_code == 0);
    CHECK(std::filesystem::exists(out));
}

TEST_CASE("sweep emits one aggregate row per sample size") {
    if (!have_cli()) return;
    TempDir dir;
    const auto csv = dir.file("sweep.csv").string();
    const auto per_seed = dir.file("per_seed.csv").string();
    auto res = run_cli(dir, "sweep --k 2 --n-grid 100,300 --seeds 2 --metric kl "
                            "--oracle-draws 20000 --format csv -o " +
                                csv + " --per-seed-output " + per_seed);
    REQUIRE(res.exit_code == 0);
    const auto text = testutil::read_file(csv);
    CHECK(text.find("mean_abs_bias") != std::string::npos);
    CHECK(std::count(text.begin(), text.end(), '\n') == 3);  // header + two rows
    const auto seed_text = testutil::read_file(per_seed);
    CHECK(std::count(seed_text.begin(), seed_text.end(), '\n') == 5);  // header + 2x2 rows
}

TEST_CASE("layer-sharpness flags only genuine violations") {
    if (!have_cli()) return;
    TempDir dir;
    Rng rng(72);
    const std::size_t n = 400;
    Matrix layer1(n, 2);
    Matrix layer2(n, 1);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        labels[i] = static_cast<int>(i % 2);
        const double mu = labels[i] == 0 ? 1.0 : -1.0;
        layer1(i, 0) = mu + rng.normal();
        layer1(i, 1) = mu + rng.normal();
        layer2(i, 0) = layer1(i, 0) >= 0.0 ? 1.0 : -1.0;  // deterministic coarsening
    }
    const auto f1 = dir.file("layer1.csv");
    const auto f2 = dir.file("layer2.csv");
    save_features(f1, layer1, labels);
    save_features(f2, layer2, labels);

    auto res = run_cli(dir, "layer-sharpness " + f1.string() + " " + f2.string() +
                                " --metric kl --format json");
    REQUIRE(res.exit_code == 0);
    const auto doc = json::parse(res.output);
    REQUIRE(doc["layers"].size() == 2);
    const double s1 = doc["layers"][0]["sharpness"].get<double>();
    const double s2 = doc["layers"][1]["sharpness"].get<double>();
    CHECK(s2 <= s1 + 0.02);
    CHECK(doc["violations"].empty());

    // Identical files give identical values.
    auto same = run_cli(dir, "layer-sharpness " + f1.string() + " " + f1.string() +
                                 " --metric kl --format json");
    REQUIRE(same.exit_code == 0);
    const auto same_doc = json::parse(same.output);
    CHECK(same_doc["layers"][0]["sharpness"] == same_doc["layers"][1]["sharpness"]);
}
