#pragma once

#include <span>
#include <string>
#include <vector>

#include "mlc/common.hpp"
#include "mlc/irt.hpp"

namespace mlc::cdi {

struct CdiRecord {
    std::string case_id;
    double raw_cdi = 0.0;
    double oriented_cdi = 0.0;
    ClassLabel class_label = ClassLabel::class2;
    bool oriented = false;
    bool converged = true;
    bool clamped = false;
};

struct CdiBin {
    double lower_edge = 0.0;  // inclusive, multiple of 0.25
    double upper_edge = 0.0;  // exclusive
    std::vector<std::string> member_ids;
};

inline constexpr double kThetaClamp = 4.0;
inline constexpr double kBinWidth = 0.25;

// Sum of per-item log response probabilities at theta.
double case_log_likelihood(double theta, std::span<const int> responses,
                           const irt::ItemBank& bank);

struct ThetaEstimate {
    double theta = 0.0;
    bool converged = true;
    bool clamped = false;
};

// Maximum-likelihood latent score, safeguarded Newton on [-4, 4] with a
// bisection bracket on the derivative. Perfect patterns clamp to the bound.
ThetaEstimate estimate_cdi(std::span<const int> responses, const irt::ItemBank& bank);

// Scores every row of the matrix; class labels copied when present.
std::vector<CdiRecord> estimate_all(const irt::ResponseMatrix& responses,
                                    const irt::ItemBank& bank);

// class1 records get oriented_cdi = -raw_cdi, class2 keep the raw value.
// Re-orienting an already oriented list throws.
std::vector<CdiRecord> orient_cdis(std::vector<CdiRecord> records);

// Half-open bins [k*0.25, (k+1)*0.25) over oriented values, grid anchored at 0.
std::vector<CdiBin> bin_cdis(const std::vector<CdiRecord>& records);

// Lower edge of the bin holding an oriented value.
double bin_lower_edge(double oriented_cdi);

std::string to_csv(const std::vector<CdiRecord>& records);
std::vector<CdiRecord> from_csv(const std::string& text);

}  // namespace mlc::cdi
