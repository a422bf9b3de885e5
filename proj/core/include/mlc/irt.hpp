#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mlc/common.hpp"

#include <nlohmann/json_fwd.hpp>

namespace mlc::irt {

enum class ModelKind { dichotomous, graded };

const char* to_string(ModelKind k);
ModelKind model_kind_from_string(const std::string& s);

struct DichotomousItem {
    double discrimination = 1.0;  // alpha, slope
    double difficulty = 0.0;      // beta, latent-scale location
};

struct GradedItem {
    double discrimination = 1.0;
    std::vector<double> thresholds;  // strictly increasing, size m = categories - 1
};

struct ItemBank {
    ModelKind model_kind = ModelKind::dichotomous;
    std::vector<DichotomousItem> dichotomous;
    std::vector<GradedItem> graded;
    int n_categories = 2;

    std::size_t size() const {
        return model_kind == ModelKind::dichotomous ? dichotomous.size() : graded.size();
    }

    nlohmann::json to_json() const;
    static ItemBank from_json(const nlohmann::json& j);
    void save(const std::string& path) const;
    static ItemBank load(const std::string& path);
};

struct ResponseMatrix {
    std::vector<std::string> case_ids;
    std::vector<std::vector<int>> codes;  // one row per case
    std::vector<ClassLabel> class_labels;

    std::size_t n_cases() const { return codes.size(); }
    std::size_t n_items() const { return codes.empty() ? 0 : codes[0].size(); }
};

struct FitConfig {
    int quadrature_points = 61;
    double quad_lo = -6.0;
    double quad_hi = 6.0;
    double tol = 1e-4;
    int max_iter = 500;
    double min_discrimination = 0.05;
    double max_discrimination = 10.0;

    static FitConfig from_json(const nlohmann::json& j);
};

struct CategoryRemap {
    std::size_t item;
    int from_category;
    int into_category;
};

struct FitResult {
    ItemBank bank;
    bool converged = false;
    int iterations = 0;
    // Marginal log-likelihood after each EM iteration (non-decreasing).
    std::vector<double> log_likelihood_trace;
    std::vector<CategoryRemap> remaps;  // graded fits only
};

// Eq.-style 2PL response curve: exp[a(t-b)] / (1 + exp[a(t-b)]).
// Saturates cleanly for large |a(t-b)|, never returns 0, 1, or NaN
// for finite inputs.
double prob_correct_2pl(double theta, const DichotomousItem& item);

// Category probabilities by differencing adjacent cumulative 2PL curves.
// Returns m+1 probabilities summing to 1. Throws on non-increasing thresholds.
std::vector<double> category_probs_grm(double theta, const GradedItem& item);

// Bock-Aitkin marginal maximum likelihood EM with a fixed quadrature grid
// and a standard-normal latent prior (fixed, identifying the scale).
FitResult fit_2pl(const ResponseMatrix& responses, const FitConfig& config = {});
FitResult fit_grm(const ResponseMatrix& responses, const FitConfig& config = {});

// Synthetic data for recovery testing: thetas ~ N(0,1), responses from the
// bank's model. Deterministic per seed. class_labels left empty.
std::pair<ResponseMatrix, std::vector<double>>
simulate_responses(const ItemBank& bank, int n_cases, std::uint64_t seed);

// Quadrature grid shared by the fitters and the tests: evenly spaced nodes
// with renormalized standard-normal weights.
struct QuadratureGrid {
    std::vector<double> nodes;
    std::vector<double> weights;
};
QuadratureGrid make_normal_grid(int points, double lo, double hi);

}  // namespace mlc::irt
