// Command-line front end: runs the evaluation pipeline end to end or one
// stage at a time, reading a single JSON run config.

#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mlc/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct GlobalOpts {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
};

mlc::pipeline::RunConfig load_config(const GlobalOpts& g) {
    if (g.config_path.empty()) throw mlc::MlcError("--config is required");
    auto config = mlc::pipeline::RunConfig::load(g.config_path);
    if (g.seed) config.seed = *g.seed;
    if (g.out_dir) config.out_dir = *g.out_dir;
    return config;
}

std::string artifact(const mlc::pipeline::RunConfig& config, const std::string& name) {
    fs::create_directories(config.out_dir);
    return (fs::path(config.out_dir) / name).string();
}

// stage family -> exit code, so scripted callers can tell failures apart
int exit_code_for(const std::string& what) {
    const std::pair<const char*, int> families[] = {
        {"stage ingest", 2}, {"stage code", 2},  {"stage fit-irt", 3},
        {"stage score-cdi", 4}, {"stage split", 5}, {"stage train", 6},
        {"stage evaluate", 7}, {"stage cat", 8},   {"stage gate", 9}};
    for (const auto& [prefix, code] : families)
        if (what.rfind(prefix, 0) == 0) return code;
    return 1;
}

void prepare_through_code(const mlc::pipeline::RunConfig& config,
                          mlc::pipeline::PipelineContext& ctx) {
    mlc::pipeline::stage_ingest(config, ctx);
    mlc::pipeline::stage_code(config, ctx);
}

void prepare_through_score(const mlc::pipeline::RunConfig& config,
                           mlc::pipeline::PipelineContext& ctx) {
    prepare_through_code(config, ctx);
    const std::string bank_path = artifact(config, "itembank.json");
    if (fs::exists(bank_path)) {
        ctx.fit.bank = mlc::irt::ItemBank::load(bank_path);
    } else {
        mlc::pipeline::stage_fit(config, ctx);
        ctx.fit.bank.save(bank_path);
    }
    mlc::pipeline::stage_score(config, ctx);
}

void prepare_through_train(const mlc::pipeline::RunConfig& config,
                           mlc::pipeline::PipelineContext& ctx) {
    prepare_through_score(config, ctx);
    mlc::pipeline::stage_split(config, ctx);
    mlc::pipeline::build_datasets(config, ctx);
    const std::string model_path = artifact(config, "model.json");
    if (fs::exists(model_path)) {
        ctx.model = mlc::classifier::TrainedModel::load(model_path);
    } else {
        mlc::pipeline::stage_train(config, ctx);
        ctx.model.save(model_path);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"IRT/CAT-based classifier evaluation: case difficulty, MLC, and gating"};
    app.require_subcommand(1);

    GlobalOpts g;
    app.add_option("--config", g.config_path, "run config JSON")->expected(1);
    std::uint64_t seed_val = 0;
    std::string out_dir_val;
    auto* seed_opt = app.add_option("--seed", seed_val, "override config seed");
    auto* out_opt = app.add_option("--out-dir", out_dir_val, "override output directory");

    auto* cmd_fit = app.add_subcommand("fit-irt", "fit item parameters, write itembank.json");
    auto* cmd_score = app.add_subcommand("score-cdi", "estimate + orient CDIs, write cdi.csv");
    auto* cmd_split = app.add_subcommand("split", "stratified 70/30 split, write split.csv");
    auto* cmd_train = app.add_subcommand("train", "grid-search train, write model.json");
    auto* cmd_eval = app.add_subcommand("evaluate", "traditional metrics, write metrics.json");
    auto* cmd_cat = app.add_subcommand("cat", "per-class CAT runs, write cat_*.csv + certificate");
    auto* cmd_gate = app.add_subcommand("gate", "apply the deployment gate to cases");
    auto* cmd_all = app.add_subcommand("run-all", "full pipeline, write comparison.json");

    // cat overrides
    std::optional<double> reliability, jitter_sd;
    std::optional<int> stop_window, max_steps;
    cmd_cat->add_option("--reliability", reliability);
    cmd_cat->add_option("--jitter-sd", jitter_sd);
    cmd_cat->add_option("--stop-window", stop_window);
    cmd_cat->add_option("--max-steps", max_steps);

    // gate inputs
    std::string cert_path, predicted, batch_csv;
    std::optional<double> gate_cdi;
    cmd_gate->add_option("--certificate", cert_path, "certificate.json path");
    cmd_gate->add_option("--cdi", gate_cdi, "raw CDI of the case");
    cmd_gate->add_option("--predicted", predicted, "predicted class (class1|class2)");
    cmd_gate->add_option("--cases", batch_csv,
                         "batch CSV with case_id,raw_cdi,predicted columns");

    CLI11_PARSE(app, argc, argv);
    if (*seed_opt) g.seed = seed_val;
    if (*out_opt) g.out_dir = out_dir_val;

    try {
        if (cmd_gate->parsed()) {
            if (cert_path.empty()) throw mlc::MlcError("gate: --certificate is required");
            const auto cert = mlc::gate::MlcCertificate::load(cert_path);
            if (!batch_csv.empty()) {
                const auto text = mlc::read_text_file(batch_csv);
                std::istringstream in(text);
                std::string line;
                if (!std::getline(in, line)) throw mlc::MlcError("gate: empty batch csv");
                json results = json::array();
                while (std::getline(in, line)) {
                    if (line.empty()) continue;
                    const auto f = mlc::split_csv_line(line);
                    if (f.size() < 3)
                        throw mlc::MlcError("gate: malformed batch row: " + line);
                    const auto d = mlc::gate::gate_case(
                        std::stod(f[1]), mlc::class_label_from_string(f[2]), cert, f[0]);
                    results.push_back(d.to_json());
                }
                std::cout << results.dump(2) << "\n";
            } else {
                if (!gate_cdi || predicted.empty())
                    throw mlc::MlcError("gate: need --cdi and --predicted (or --cases)");
                const auto d = mlc::gate::gate_case(
                    *gate_cdi, mlc::class_label_from_string(predicted), cert);
                std::cout << d.to_json().dump(2) << "\n";
            }
            return 0;
        }

        auto config = load_config(g);

        if (cmd_all->parsed()) {
            const auto report = mlc::pipeline::run_pipeline(config);
            std::cout << report.to_json(config).dump(2) << "\n";
            return 0;
        }

        mlc::pipeline::PipelineContext ctx;
        if (cmd_fit->parsed()) {
            prepare_through_code(config, ctx);
            mlc::pipeline::stage_fit(config, ctx);
            ctx.fit.bank.save(artifact(config, "itembank.json"));
            std::cout << "wrote " << artifact(config, "itembank.json")
                      << (ctx.fit.converged ? "" : " (not converged)") << "\n";
        } else if (cmd_score->parsed()) {
            prepare_through_score(config, ctx);
            mlc::write_text_file(artifact(config, "cdi.csv"), mlc::cdi::to_csv(ctx.cdis));
            std::cout << "wrote " << artifact(config, "cdi.csv") << "\n";
        } else if (cmd_split->parsed()) {
            prepare_through_score(config, ctx);
            mlc::pipeline::stage_split(config, ctx);
            mlc::write_text_file(artifact(config, "split.csv"), ctx.split.to_csv());
            std::cout << "wrote " << artifact(config, "split.csv") << "\n";
        } else if (cmd_train->parsed()) {
            prepare_through_score(config, ctx);
            mlc::pipeline::stage_split(config, ctx);
            mlc::pipeline::build_datasets(config, ctx);
            mlc::pipeline::stage_train(config, ctx);
            ctx.model.save(artifact(config, "model.json"));
            std::cout << "wrote " << artifact(config, "model.json") << "\n";
        } else if (cmd_eval->parsed()) {
            prepare_through_train(config, ctx);
            const auto metrics = mlc::classifier::traditional_metrics(
                ctx.model, ctx.test_set, config.positive_class);
            mlc::write_text_file(artifact(config, "metrics.json"),
                                 metrics.to_json().dump(2) + "\n");
            std::cout << metrics.to_json().dump(2) << "\n";
        } else if (cmd_cat->parsed()) {
            if (reliability) config.cat_config.reliability = *reliability;
            if (jitter_sd) config.cat_config.jitter_sd = *jitter_sd;
            if (stop_window) config.cat_config.stop_window = *stop_window;
            if (max_steps) config.cat_config.max_steps = *max_steps;
            prepare_through_train(config, ctx);
            const auto r1 =
                mlc::pipeline::run_cat_for_class(config, ctx, mlc::ClassLabel::class1);
            const auto r2 =
                mlc::pipeline::run_cat_for_class(config, ctx, mlc::ClassLabel::class2);
            mlc::write_text_file(artifact(config, "cat_class1.csv"), r1.trajectory_csv());
            mlc::write_text_file(artifact(config, "cat_class2.csv"), r2.trajectory_csv());
            mlc::gate::MlcCertificate cert;
            cert.model_id = "run-seed-" + std::to_string(config.seed);
            cert.mlc_class1 = r1.mlc;
            cert.mlc_class2 = r2.mlc;
            cert.reliability = config.cat_config.reliability;
            cert.save(artifact(config, "certificate.json"));
            std::cout << json{{"class1", r1.to_json()}, {"class2", r2.to_json()}}.dump(2)
                      << "\n";
        }
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e.what());
    }
}
