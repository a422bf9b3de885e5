#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mlc/cdi.hpp"
#include "mlc/classifier.hpp"
#include "mlc/common.hpp"

#include <nlohmann/json_fwd.hpp>

namespace mlc::cat {

struct CatConfig {
    double reliability = 0.98;
    double sigma = 1.0;
    double jitter_sd = 0.1;  // 0 disables the Gaussian perturbation
    int min_cases_for_mlc = 5;
    int stop_window = 5;
    int max_steps = 1000;
    int step_l_offset = 0;  // added to L inside the 2/2^L step
    std::uint64_t seed = 0;

    // stopping threshold, sigma * sqrt(1 - r)
    double se_m() const { return sigma * std::sqrt(1.0 - reliability); }

    static CatConfig from_json(const nlohmann::json& j);
};

struct PoolCase {
    std::string case_id;
    double oriented_cdi = 0.0;
};

struct Administration {
    std::string case_id;
    double oriented_cdi = 0.0;
    bool correct = false;
    double target_after = 0.0;    // target updated after this administration
    double running_mlc = std::numeric_limits<double>::quiet_NaN();  // from L >= 5
};

enum class StopReason { se_threshold, pool_exhausted_refusal, max_iterations };
const char* to_string(StopReason r);

struct CatSession {
    ClassLabel class_under_test = ClassLabel::class1;
    std::vector<PoolCase> pool;
    double target_cdi = 0.0;
    std::vector<Administration> administered;
    std::vector<char> used;       // parallel to pool
    int L = 0, R = 0, W = 0;
    double H = 0.0;
    std::vector<double> target_history;  // target after each update
    Rng rng;
};

struct MlcReport {
    ClassLabel class_under_test = ClassLabel::class1;
    double mlc = 0.0;
    int cases_used = 0;
    double fraction_of_dataset = 0.0;
    double wall_time_seconds = 0.0;
    StopReason stop_reason = StopReason::se_threshold;
    std::vector<Administration> trajectory;

    nlohmann::json to_json() const;
    std::string trajectory_csv() const;
};

// 25th-percentile initializer; the first selected case is the pool member
// with oriented CDI nearest that percentile.
CatSession initialize(std::vector<PoolCase> pool, const CatConfig& config);

// Unadministered case nearest the current target; ties go to the lower case_id.
std::size_t select_next(const CatSession& session);

// target +- 2/2^L plus seeded Gaussian jitter. L includes the case just
// administered.
double update_target(CatSession& session, bool correct, const CatConfig& config);

bool should_stop(const CatSession& session, const CatConfig& config);

// H/L + ln(R/W), with the +-0.5 corrections when R or W is zero.
double compute_mlc(int L, double H, int R, int W, int min_cases);
double compute_mlc(const CatSession& session, const CatConfig& config);

// Full loop. `predict` maps a case_id to the classifier's predicted class;
// an administration is correct when that equals the session class.
using CasePredictor = std::function<ClassLabel(const std::string& case_id)>;

MlcReport run_cat(const CasePredictor& predict, std::vector<PoolCase> pool,
                  ClassLabel class_under_test, const CatConfig& config,
                  std::size_t total_dataset_size);

// Convenience wrapper: classifier model + feature lookup by case id.
using FeatureLookup = std::function<const std::vector<double>&(const std::string&)>;

MlcReport run_cat(const classifier::TrainedModel& model, const FeatureLookup& features,
                  std::vector<PoolCase> pool, ClassLabel class_under_test,
                  const CatConfig& config, std::size_t total_dataset_size);

}  // namespace mlc::cat
