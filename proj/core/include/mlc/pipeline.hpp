#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mlc/cat.hpp"
#include "mlc/cdi.hpp"
#include "mlc/classifier.hpp"
#include "mlc/common.hpp"
#include "mlc/dataprep.hpp"
#include "mlc/gate.hpp"
#include "mlc/irt.hpp"

#include <nlohmann/json_fwd.hpp>

namespace mlc::pipeline {

struct RunConfig {
    std::string data_path;
    dataprep::TableSchema schema;
    dataprep::CodingSpec coding;
    irt::ModelKind model_kind = irt::ModelKind::dichotomous;
    bool balance = true;
    std::uint64_t seed = 0;
    irt::FitConfig fit;
    classifier::HyperGrid grid = classifier::HyperGrid::defaults();
    classifier::TrainConfig train;
    cat::CatConfig cat_config;
    std::string out_dir = "out";
    ClassLabel positive_class = ClassLabel::class2;

    nlohmann::json to_json() const;  // echoed verbatim into reports
    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig load(const std::string& path);
};

// Intermediates shared by the CLI subcommands; each stage fills its slice.
struct PipelineContext {
    dataprep::RawTable table;                 // ingested + balanced
    irt::ResponseMatrix responses;
    dataprep::CodingReport coding_report;
    irt::FitResult fit;
    std::vector<cdi::CdiRecord> cdis;         // oriented
    dataprep::SplitAssignment split;
    classifier::Dataset train_set, test_set;  // classifier features = scaled codes
    classifier::TrainedModel model;
};

struct ComparisonReport {
    classifier::MetricsReport traditional;
    cat::MlcReport cat_class1, cat_class2;
    gate::MlcCertificate certificate;
    gate::GatedAccuracy gated;
    std::size_t total_cases = 0;   // balanced dataset size
    std::size_t n_train = 0, n_test = 0;

    nlohmann::json to_json(const RunConfig& config) const;
};

// Stage functions, composable by the CLI. Each throws MlcError with the
// stage name on failure.
void stage_ingest(const RunConfig& config, PipelineContext& ctx);
void stage_code(const RunConfig& config, PipelineContext& ctx);
void stage_fit(const RunConfig& config, PipelineContext& ctx);
void stage_score(const RunConfig& config, PipelineContext& ctx);
void stage_split(const RunConfig& config, PipelineContext& ctx);
void stage_train(const RunConfig& config, PipelineContext& ctx);

// Builds the classifier datasets from responses + split (codes scaled to [0,1]).
void build_datasets(const RunConfig& config, PipelineContext& ctx);

cat::MlcReport run_cat_for_class(const RunConfig& config, const PipelineContext& ctx,
                                 ClassLabel cls);

// Full end-to-end run; writes every artifact under config.out_dir
// (itembank.json, cdi.csv, split.csv, model.json, metrics.json,
// cat_class1.csv, cat_class2.csv, certificate.json, comparison.json,
// plus plot-ready cdi_histogram.csv and bin_accuracy.csv).
ComparisonReport run_pipeline(const RunConfig& config);

// Timing table: traditional metric evaluation vs the two CAT loops.
nlohmann::json emit_timing(const ComparisonReport& report);

// Per-bin accuracy of the model over a labelled dataset, keyed by the bin
// lower edge of each case's oriented CDI.
struct BinAccuracy {
    double bin_lower;
    ClassLabel cls;
    std::size_t n = 0;
    std::size_t correct = 0;
};
std::vector<BinAccuracy> per_bin_accuracy(const classifier::TrainedModel& model,
                                          const classifier::Dataset& data,
                                          const std::vector<cdi::CdiRecord>& cdis);

}  // namespace mlc::pipeline
