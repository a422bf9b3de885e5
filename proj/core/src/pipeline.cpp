#include "mlc/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

namespace mlc::pipeline {

namespace {

[[noreturn]] void stage_fail(const std::string& stage, const std::exception& e) {
    throw MlcError("stage " + stage + ": " + e.what());
}

std::map<std::string, std::size_t> index_by_id(const std::vector<std::string>& ids) {
    std::map<std::string, std::size_t> m;
    for (std::size_t i = 0; i < ids.size(); ++i) m[ids[i]] = i;
    return m;
}

}  // namespace

// ---------------------------------------------------------------- config --

nlohmann::json RunConfig::to_json() const {
    nlohmann::json j;
    j["data"] = data_path;
    j["schema"] = {{"features", schema.features},
                   {"label_column", schema.label_column},
                   {"class1_value", schema.class1_value}};
    if (schema.id_column) j["schema"]["id_column"] = *schema.id_column;
    j["coding_spec"] = coding.to_json();
    j["model_kind"] = irt::to_string(model_kind);
    j["balance"] = balance;
    j["seed"] = seed;
    j["fit"] = {{"quadrature_points", fit.quadrature_points},
                {"quad_lo", fit.quad_lo},
                {"quad_hi", fit.quad_hi},
                {"tol", fit.tol},
                {"max_iter", fit.max_iter}};
    nlohmann::json acts = nlohmann::json::array();
    for (auto a : grid.activations) acts.push_back(classifier::to_string(a));
    j["grid"] = {{"activations", acts},
                 {"learning_rates", grid.learning_rates},
                 {"hidden_units", grid.hidden_units}};
    j["train"] = {{"epochs", train.epochs}, {"folds", train.folds}};
    j["cat"] = {{"reliability", cat_config.reliability},
                {"sigma", cat_config.sigma},
                {"jitter_sd", cat_config.jitter_sd},
                {"min_cases_for_mlc", cat_config.min_cases_for_mlc},
                {"stop_window", cat_config.stop_window},
                {"max_steps", cat_config.max_steps},
                {"step_l_offset", cat_config.step_l_offset}};
    j["out_dir"] = out_dir;
    j["positive_class"] = to_string(positive_class);
    return j;
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
    RunConfig c;
    c.data_path = j.at("data").get<std::string>();
    const auto& s = j.at("schema");
    c.schema.features = s.at("features").get<std::vector<std::string>>();
    c.schema.label_column = s.at("label_column").get<std::string>();
    c.schema.class1_value = s.value("class1_value", 1.0);
    if (s.contains("id_column") && !s["id_column"].is_null())
        c.schema.id_column = s["id_column"].get<std::string>();
    if (j.contains("coding_spec_path"))
        c.coding = dataprep::CodingSpec::load(j["coding_spec_path"].get<std::string>());
    else
        c.coding = dataprep::CodingSpec::from_json(j.at("coding_spec"));
    c.model_kind = irt::model_kind_from_string(j.at("model_kind").get<std::string>());
    c.balance = j.value("balance", true);
    c.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("fit")) c.fit = irt::FitConfig::from_json(j["fit"]);
    if (j.contains("grid")) c.grid = classifier::HyperGrid::from_json(j["grid"]);
    if (j.contains("train")) {
        const auto& t = j["train"];
        c.train.epochs = t.value("epochs", c.train.epochs);
        c.train.folds = t.value("folds", c.train.folds);
        c.train.threads = t.value("threads", c.train.threads);
    }
    if (j.contains("cat")) c.cat_config = cat::CatConfig::from_json(j["cat"]);
    c.out_dir = j.value("out_dir", std::string("out"));
    if (j.contains("positive_class"))
        c.positive_class = class_label_from_string(j["positive_class"].get<std::string>());
    return c;
}

RunConfig RunConfig::load(const std::string& path) {
    return from_json(nlohmann::json::parse(read_text_file(path)));
}

// ---------------------------------------------------------------- stages --

void stage_ingest(const RunConfig& config, PipelineContext& ctx) {
    try {
        ctx.table = dataprep::ingest_csv(config.data_path, config.schema);
        if (config.balance)
            ctx.table = dataprep::balance_classes(ctx.table,
                                                  derive_seed(config.seed, 0xba1));
    } catch (const std::exception& e) {
        stage_fail("ingest", e);
    }
}

void stage_code(const RunConfig& config, PipelineContext& ctx) {
    try {
        auto [rm, report] = dataprep::apply_coding(ctx.table, config.coding);
        ctx.responses = std::move(rm);
        ctx.coding_report = std::move(report);
    } catch (const std::exception& e) {
        stage_fail("code", e);
    }
}

void stage_fit(const RunConfig& config, PipelineContext& ctx) {
    try {
        ctx.fit = config.model_kind == irt::ModelKind::dichotomous
                      ? irt::fit_2pl(ctx.responses, config.fit)
                      : irt::fit_grm(ctx.responses, config.fit);
    } catch (const std::exception& e) {
        stage_fail("fit-irt", e);
    }
}

void stage_score(const RunConfig& config, PipelineContext& ctx) {
    try {
        (void)config;
        ctx.cdis = cdi::orient_cdis(cdi::estimate_all(ctx.responses, ctx.fit.bank));
    } catch (const std::exception& e) {
        stage_fail("score-cdi", e);
    }
}

void stage_split(const RunConfig& config, PipelineContext& ctx) {
    try {
        ctx.split = dataprep::stratified_split(ctx.cdis, derive_seed(config.seed, 0x5b11));
    } catch (const std::exception& e) {
        stage_fail("split", e);
    }
}

void build_datasets(const RunConfig& config, PipelineContext& ctx) {
    (void)config;
    const double denom = std::max(1, ctx.coding_report.n_categories - 1);
    ctx.train_set = {};
    ctx.test_set = {};
    for (std::size_t s = 0; s < ctx.responses.n_cases(); ++s) {
        std::vector<double> feats;
        feats.reserve(ctx.responses.n_items());
        for (int code : ctx.responses.codes[s]) feats.push_back(code / denom);
        const auto role = ctx.split.roles.at(ctx.responses.case_ids[s]);
        auto& ds = role == dataprep::SplitRole::train ? ctx.train_set : ctx.test_set;
        ds.case_ids.push_back(ctx.responses.case_ids[s]);
        ds.features.push_back(std::move(feats));
        ds.labels.push_back(ctx.responses.class_labels[s]);
    }
}

void stage_train(const RunConfig& config, PipelineContext& ctx) {
    try {
        classifier::TrainConfig tc = config.train;
        tc.seed = derive_seed(config.seed, 0x7a11);
        ctx.model = classifier::grid_search_train(ctx.train_set, config.grid, tc);
    } catch (const std::exception& e) {
        stage_fail("train", e);
    }
}

cat::MlcReport run_cat_for_class(const RunConfig& config, const PipelineContext& ctx,
                                 ClassLabel cls) {
    const auto by_id = index_by_id(ctx.test_set.case_ids);
    std::vector<cat::PoolCase> pool;
    for (const auto& r : ctx.cdis) {
        if (r.class_label != cls) continue;
        if (!by_id.count(r.case_id)) continue;  // test-set cases only
        pool.push_back({r.case_id, r.oriented_cdi});
    }

    cat::CatConfig cc = config.cat_config;
    cc.seed = derive_seed(config.seed, cls == ClassLabel::class1 ? 0xca71 : 0xca72);
    cat::FeatureLookup lookup = [&](const std::string& id) -> const std::vector<double>& {
        const auto it = by_id.find(id);
        if (it == by_id.end()) throw MlcError("feature lookup miss: " + id);
        return ctx.test_set.features[it->second];
    };
    return cat::run_cat(ctx.model, lookup, std::move(pool), cls, cc,
                        ctx.responses.n_cases());
}

std::vector<BinAccuracy> per_bin_accuracy(const classifier::TrainedModel& model,
                                          const classifier::Dataset& data,
                                          const std::vector<cdi::CdiRecord>& cdis) {
    std::map<std::string, double> oriented;
    for (const auto& r : cdis) oriented[r.case_id] = r.oriented_cdi;

    std::map<std::pair<long, int>, BinAccuracy> acc;
    for (std::size_t s = 0; s < data.size(); ++s) {
        const auto it = oriented.find(data.case_ids[s]);
        if (it == oriented.end()) continue;
        const double lower = cdi::bin_lower_edge(it->second);
        const auto key = std::make_pair(std::lround(lower / cdi::kBinWidth),
                                        data.labels[s] == ClassLabel::class1 ? 1 : 2);
        auto& b = acc[key];
        b.bin_lower = lower;
        b.cls = data.labels[s];
        b.n += 1;
        b.correct += classifier::predict(model, data.features[s]).label == data.labels[s];
    }
    std::vector<BinAccuracy> out;
    out.reserve(acc.size());
    for (auto& [_, b] : acc) out.push_back(b);
    return out;
}

// -------------------------------------------------------------- full run --

ComparisonReport run_pipeline(const RunConfig& config) {
    namespace fs = std::filesystem;
    fs::create_directories(config.out_dir);
    const auto out = [&](const std::string& name) {
        return (fs::path(config.out_dir) / name).string();
    };

    PipelineContext ctx;
    stage_ingest(config, ctx);
    stage_code(config, ctx);
    stage_fit(config, ctx);
    ctx.fit.bank.save(out("itembank.json"));
    stage_score(config, ctx);
    write_text_file(out("cdi.csv"), cdi::to_csv(ctx.cdis));
    stage_split(config, ctx);
    write_text_file(out("split.csv"), ctx.split.to_csv());
    build_datasets(config, ctx);
    stage_train(config, ctx);
    ctx.model.save(out("model.json"));

    ComparisonReport report;
    report.total_cases = ctx.responses.n_cases();
    report.n_train = ctx.train_set.size();
    report.n_test = ctx.test_set.size();

    try {
        report.traditional =
            classifier::traditional_metrics(ctx.model, ctx.test_set, config.positive_class);
    } catch (const std::exception& e) {
        stage_fail("evaluate", e);
    }
    write_text_file(out("metrics.json"), report.traditional.to_json().dump(2) + "\n");

    try {
        report.cat_class1 = run_cat_for_class(config, ctx, ClassLabel::class1);
        report.cat_class2 = run_cat_for_class(config, ctx, ClassLabel::class2);
    } catch (const std::exception& e) {
        stage_fail("cat", e);
    }
    write_text_file(out("cat_class1.csv"), report.cat_class1.trajectory_csv());
    write_text_file(out("cat_class2.csv"), report.cat_class2.trajectory_csv());

    report.certificate.model_id = "run-seed-" + std::to_string(config.seed);
    report.certificate.mlc_class1 = report.cat_class1.mlc;
    report.certificate.mlc_class2 = report.cat_class2.mlc;
    report.certificate.reliability = config.cat_config.reliability;
    report.certificate.save(out("certificate.json"));

    try {
        report.gated =
            gate::gated_accuracy(ctx.test_set, ctx.cdis, report.certificate, ctx.model);
    } catch (const std::exception& e) {
        stage_fail("gate", e);
    }

    // plot-ready data: per-class CDI histograms on the 0.25 grid
    {
        std::map<std::pair<long, int>, std::size_t> hist;
        for (const auto& r : ctx.cdis) {
            const double lower = cdi::bin_lower_edge(r.oriented_cdi);
            hist[{std::lround(lower / cdi::kBinWidth),
                  r.class_label == ClassLabel::class1 ? 1 : 2}] += 1;
        }
        std::ostringstream csv;
        csv << "bin_lower,class,count\n";
        for (const auto& [key, n] : hist)
            csv << key.first * cdi::kBinWidth << ",class" << key.second << ',' << n << '\n';
        write_text_file(out("cdi_histogram.csv"), csv.str());
    }
    {
        const auto bins = per_bin_accuracy(ctx.model, ctx.test_set, ctx.cdis);
        std::ostringstream csv;
        csv << "bin_lower,class,n,correct,accuracy\n";
        for (const auto& b : bins)
            csv << b.bin_lower << ',' << to_string(b.cls) << ',' << b.n << ',' << b.correct
                << ',' << static_cast<double>(b.correct) / b.n << '\n';
        write_text_file(out("bin_accuracy.csv"), csv.str());
    }
    {
        std::ostringstream csv;
        csv << "mlc_class1,mlc_class2\n"
            << report.cat_class1.mlc << ',' << report.cat_class2.mlc << '\n';
        write_text_file(out("mlc_coordinates.csv"), csv.str());
    }

    write_text_file(out("comparison.json"), report.to_json(config).dump(2) + "\n");
    return report;
}

nlohmann::json emit_timing(const ComparisonReport& report) {
    const double cat_total =
        report.cat_class1.wall_time_seconds + report.cat_class2.wall_time_seconds;
    nlohmann::json j{{"traditional_seconds", report.traditional.wall_time_seconds},
                     {"cat_class1_seconds", report.cat_class1.wall_time_seconds},
                     {"cat_class2_seconds", report.cat_class2.wall_time_seconds},
                     {"cat_total_seconds", cat_total}};
    j["cat_over_traditional_ratio"] =
        report.traditional.wall_time_seconds > 0.0
            ? nlohmann::json(cat_total / report.traditional.wall_time_seconds)
            : nlohmann::json();
    return j;
}

nlohmann::json ComparisonReport::to_json(const RunConfig& config) const {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["config"] = config.to_json();
    j["total_cases"] = total_cases;
    j["n_train"] = n_train;
    j["n_test"] = n_test;
    j["traditional"] = traditional.to_json();
    j["cat"] = {{"class1", cat_class1.to_json()}, {"class2", cat_class2.to_json()}};
    j["certificate"] = certificate.to_json();
    nlohmann::json g;
    g["class1_accuracy"] = gated.class1 ? nlohmann::json(*gated.class1) : nlohmann::json();
    g["class2_accuracy"] = gated.class2 ? nlohmann::json(*gated.class2) : nlohmann::json();
    g["n_gated_class1"] = gated.n_gated_class1;
    g["n_gated_class2"] = gated.n_gated_class2;
    j["gated_accuracy"] = std::move(g);
    j["timing"] = emit_timing(*this);
    return j;
}

}  // namespace mlc::pipeline
