#include "mlc/gate.hpp"

#include <map>

#include <nlohmann/json.hpp>

namespace mlc::gate {

const char* to_string(Verdict v) {
    return v == Verdict::algorithm ? "algorithm" : "human_review";
}

GateDecision gate_case(double raw_cdi, ClassLabel predicted_class,
                       const MlcCertificate& cert, const std::string& case_id) {
    GateDecision d;
    d.case_id = case_id;
    d.predicted_class = predicted_class;
    d.oriented_cdi = predicted_class == ClassLabel::class1 ? -raw_cdi : raw_cdi;
    d.threshold = predicted_class == ClassLabel::class1 ? cert.mlc_class1 : cert.mlc_class2;
    d.verdict = d.oriented_cdi <= d.threshold ? Verdict::algorithm : Verdict::human_review;
    return d;
}

GatedAccuracy gated_accuracy(const classifier::Dataset& test,
                             const std::vector<cdi::CdiRecord>& cdis,
                             const MlcCertificate& cert,
                             const classifier::TrainedModel& model) {
    std::map<std::string, double> raw_by_id;
    for (const auto& r : cdis) raw_by_id[r.case_id] = r.raw_cdi;

    std::size_t n1 = 0, c1 = 0, n2 = 0, c2 = 0;
    for (std::size_t s = 0; s < test.size(); ++s) {
        const auto it = raw_by_id.find(test.case_ids[s]);
        if (it == raw_by_id.end())
            throw MlcError("no CDI for test case " + test.case_ids[s]);
        const auto pred = classifier::predict(model, test.features[s]);
        const auto decision = gate_case(it->second, pred.label, cert, test.case_ids[s]);
        if (decision.verdict != Verdict::algorithm) continue;
        const bool correct = pred.label == test.labels[s];
        if (test.labels[s] == ClassLabel::class1) {
            ++n1;
            c1 += correct;
        } else {
            ++n2;
            c2 += correct;
        }
    }

    GatedAccuracy out;
    out.n_gated_class1 = n1;
    out.n_gated_class2 = n2;
    if (n1) out.class1 = static_cast<double>(c1) / n1;
    if (n2) out.class2 = static_cast<double>(c2) / n2;
    return out;
}

nlohmann::json MlcCertificate::to_json() const {
    return {{"schema_version", 1}, {"model_id", model_id},   {"mlc_class1", mlc_class1},
            {"mlc_class2", mlc_class2}, {"reliability", reliability}, {"created", created}};
}

MlcCertificate MlcCertificate::from_json(const nlohmann::json& j) {
    MlcCertificate c;
    c.model_id = j.value("model_id", "");
    c.mlc_class1 = j.at("mlc_class1").get<double>();
    c.mlc_class2 = j.at("mlc_class2").get<double>();
    c.reliability = j.value("reliability", 0.98);
    c.created = j.value("created", "");
    return c;
}

MlcCertificate MlcCertificate::load(const std::string& path) {
    return from_json(nlohmann::json::parse(read_text_file(path)));
}

void MlcCertificate::save(const std::string& path) const {
    write_text_file(path, to_json().dump(2) + "\n");
}

nlohmann::json GateDecision::to_json() const {
    return {{"case_id", case_id},
            {"predicted_class", mlc::to_string(predicted_class)},
            {"oriented_cdi", oriented_cdi},
            {"threshold", threshold},
            {"verdict", to_string(verdict)}};
}

}  // namespace mlc::gate
