#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "mlc/cdi.hpp"
#include "mlc/common.hpp"
#include "mlc/irt.hpp"

#include <nlohmann/json_fwd.hpp>

namespace mlc::dataprep {

struct TableSchema {
    std::vector<std::string> features;   // columns to ingest, header-keyed
    std::string label_column;
    double class1_value = 1.0;           // label value mapped to class1
    std::optional<std::string> id_column;  // row index used when absent
};

struct RawTable {
    std::vector<std::string> feature_names;
    std::vector<std::string> case_ids;
    std::vector<std::vector<double>> rows;  // row-major, one per case
    std::vector<ClassLabel> labels;

    std::size_t n_rows() const { return rows.size(); }
    std::vector<double> column(std::size_t i) const;
};

// ------------------------------------------------------------ coding spec --

// code 0 inside [normal_low, normal_high], 1 outside
struct RangeRule {
    double normal_low, normal_high;
};

// explicit raw value -> code map (categorical features)
struct CategoryRule {
    std::map<double, int> mapping;
};

// code 1 on the flagged side of the cut
struct ThresholdRule {
    double cut;
    bool above_is_one = true;  // false: below-or-equal codes 1
};

// graded coding by cutpoints; empty + auto_compute: quartiles from the data.
// Values <= a cutpoint fall in the lower category.
struct QuartileRule {
    std::vector<double> cutpoints;  // strictly increasing
    bool auto_compute = false;
};

struct FeatureRule {
    std::variant<RangeRule, CategoryRule, ThresholdRule, QuartileRule> rule;
    bool negate = false;  // multiply raw value by -1 before coding
};

struct CodingSpec {
    std::map<std::string, FeatureRule> rules;

    nlohmann::json to_json() const;
    static CodingSpec from_json(const nlohmann::json& j);
    static CodingSpec load(const std::string& path);
};

struct CodingReport {
    // auto-computed quartile cutpoints, echoed per feature
    std::map<std::string, std::vector<double>> resolved_cutpoints;
    int n_categories = 2;
};

// ------------------------------------------------------------- operations --

RawTable ingest_csv(const std::string& path, const TableSchema& schema);

std::pair<irt::ResponseMatrix, CodingReport>
apply_coding(const RawTable& table, const CodingSpec& spec);

// Majority class down-sampled without replacement to the minority size.
RawTable balance_classes(const RawTable& table, std::uint64_t seed);

enum class SplitRole { train, test };

struct SplitAssignment {
    std::map<std::string, SplitRole> roles;
    struct BinCounts {
        double bin_lower;
        std::size_t n_train, n_test;
    };
    std::vector<BinCounts> bins;

    std::string to_csv() const;
};

// Per-CDI-bin random 70/30 split; size-2 bins split 1/1, singletons to train.
SplitAssignment stratified_split(const std::vector<cdi::CdiRecord>& records,
                                 std::uint64_t seed);

}  // namespace mlc::dataprep
