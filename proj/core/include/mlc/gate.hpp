#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mlc/cdi.hpp"
#include "mlc/classifier.hpp"
#include "mlc/common.hpp"

#include <nlohmann/json_fwd.hpp>

namespace mlc::gate {

struct MlcCertificate {
    std::string model_id;
    double mlc_class1 = 0.0;
    double mlc_class2 = 0.0;
    double reliability = 0.98;
    std::string created;  // informational

    nlohmann::json to_json() const;
    static MlcCertificate from_json(const nlohmann::json& j);
    static MlcCertificate load(const std::string& path);
    void save(const std::string& path) const;
};

enum class Verdict { algorithm, human_review };
const char* to_string(Verdict v);

struct GateDecision {
    std::string case_id;
    ClassLabel predicted_class = ClassLabel::class2;
    double oriented_cdi = 0.0;
    double threshold = 0.0;
    Verdict verdict = Verdict::algorithm;

    nlohmann::json to_json() const;
};

// Orient the raw CDI by the predicted class, then compare against that
// class's MLC. At or below the MLC the algorithm's call stands; strictly
// above it the case goes to human review.
GateDecision gate_case(double raw_cdi, ClassLabel predicted_class,
                       const MlcCertificate& cert, const std::string& case_id = "");

struct GatedAccuracy {
    std::optional<double> class1;  // absent when no gated cases of that class
    std::optional<double> class2;
    std::size_t n_gated_class1 = 0;
    std::size_t n_gated_class2 = 0;
};

// Accuracy among algorithm-verdict cases, per true class.
GatedAccuracy gated_accuracy(const classifier::Dataset& test,
                             const std::vector<cdi::CdiRecord>& cdis,
                             const MlcCertificate& cert,
                             const classifier::TrainedModel& model);

}  // namespace mlc::gate
