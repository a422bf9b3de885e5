#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mlc/common.hpp"

#include <nlohmann/json_fwd.hpp>

namespace mlc::classifier {

enum class Activation { softmax, softplus, softsign, relu, tanh, sigmoid, hard_sigmoid };

const char* to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct HyperGrid {
    std::vector<Activation> activations;
    std::vector<double> learning_rates;
    std::vector<int> hidden_units;

    // the full grid described in the training methodology
    static HyperGrid defaults();
    static HyperGrid from_json(const nlohmann::json& j);
};

struct TrainConfig {
    int epochs = 200;
    double early_stop_delta = 1e-6;
    int early_stop_patience = 10;
    int folds = 5;
    std::uint64_t seed = 0;
    int threads = 0;  // 0: hardware concurrency
};

struct Dataset {
    std::vector<std::string> case_ids;
    std::vector<std::vector<double>> features;
    std::vector<ClassLabel> labels;

    std::size_t size() const { return features.size(); }
};

// Single-hidden-layer feed-forward net, sigmoid output giving the class-2
// probability. hidden_units == 0 degenerates to logistic regression.
struct TrainedModel {
    Activation activation = Activation::sigmoid;
    int hidden_units = 0;
    double learning_rate = 0.0;
    std::size_t n_features = 0;

    std::vector<double> w1;  // hidden x features
    std::vector<double> b1;  // hidden
    std::vector<double> w2;  // hidden (or features when hidden == 0)
    double b2 = 0.0;

    int epochs_run = 0;
    double final_loss = 0.0;
    std::uint64_t seed = 0;
    double cv_accuracy = 0.0;

    nlohmann::json to_json() const;
    static TrainedModel from_json(const nlohmann::json& j);
    void save(const std::string& path) const;
    static TrainedModel load(const std::string& path);
};

struct Prediction {
    ClassLabel label;   // class2 iff score >= 0.5
    double score;       // class-2 probability
};

struct MetricsReport {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::optional<double> auc;  // absent on single-class test sets
    std::size_t n_cases = 0;
    double wall_time_seconds = 0.0;

    nlohmann::json to_json() const;
};

// Every grid cell scored by mean validation accuracy over k folds, best cell
// refit on the full training set. Ties break toward fewer hidden units, then
// lower learning rate. Deterministic per seed; cells may train in parallel.
TrainedModel grid_search_train(const Dataset& train, const HyperGrid& grid,
                               const TrainConfig& config);

// Direct training of one configuration (no cross-validation).
TrainedModel train_single(const Dataset& train, Activation act, int hidden, double lr,
                          const TrainConfig& config);

Prediction predict(const TrainedModel& model, std::span<const double> features);

// 0.5-threshold confusion metrics with a configurable positive class, plus
// rank-statistic AUC (tie-corrected). Wall time covers the full evaluation.
MetricsReport traditional_metrics(const TrainedModel& model, const Dataset& test,
                                  ClassLabel positive = ClassLabel::class2);

// Tie-corrected Mann-Whitney AUC over raw scores.
double auc_from_scores(std::span<const double> scores, std::span<const ClassLabel> labels,
                       ClassLabel positive);

}  // namespace mlc::classifier
