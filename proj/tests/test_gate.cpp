#include <cmath>
#include <doctest.h>

#include <nlohmann/json.hpp>

#include "mlc/gate.hpp"
#include "test_support.hpp"

using namespace mlc;
using namespace mlc::gate;

TEST_SUITE_BEGIN("gate");

namespace {

MlcCertificate mimic_cert() {
    MlcCertificate cert;
    cert.model_id = "mimic-example";
    cert.mlc_class1 = 0.43;
    cert.mlc_class2 = 0.78;
    return cert;
}

MlcCertificate pulsar_cert() {
    MlcCertificate cert;
    cert.model_id = "pulsar-example";
    cert.mlc_class1 = 0.12;
    cert.mlc_class2 = 0.32;
    return cert;
}

}  // namespace

TEST_CASE("worked example: hard class2 case goes to review") {
    const auto d = gate_case(0.80, ClassLabel::class2, mimic_cert(), "a");
    CHECK(d.oriented_cdi == doctest::Approx(0.80));
    CHECK(d.threshold == doctest::Approx(0.78));
    CHECK(d.verdict == Verdict::human_review);
}

TEST_CASE("worked example: same raw CDI predicted class1 stays automated") {
    const auto d = gate_case(0.80, ClassLabel::class1, mimic_cert(), "a");
    CHECK(d.oriented_cdi == doctest::Approx(-0.80));
    CHECK(d.threshold == doctest::Approx(0.43));
    CHECK(d.verdict == Verdict::algorithm);
}

TEST_CASE("worked example: easy case automated under either prediction") {
    const auto as2 = gate_case(0.10, ClassLabel::class2, pulsar_cert());
    CHECK(as2.verdict == Verdict::algorithm);
    const auto as1 = gate_case(0.10, ClassLabel::class1, pulsar_cert());
    CHECK(as1.oriented_cdi == doctest::Approx(-0.10));
    CHECK(as1.verdict == Verdict::algorithm);
}

TEST_CASE("boundary equality goes to the algorithm") {
    const auto d = gate_case(0.78, ClassLabel::class2, mimic_cert());
    CHECK(d.verdict == Verdict::algorithm);
    const auto above = gate_case(std::nextafter(0.78, 1.0), ClassLabel::class2, mimic_cert());
    CHECK(above.verdict == Verdict::human_review);
}

TEST_CASE("gate is monotone in oriented difficulty") {
    const auto cert = mimic_cert();
    Rng rng(6);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int i = 0; i < 500; ++i) {
        const double raw = normal(rng);
        const auto pred = rng() % 2 ? ClassLabel::class1 : ClassLabel::class2;
        const auto d = gate_case(raw, pred, cert);
        CHECK((d.verdict == Verdict::algorithm) == (d.oriented_cdi <= d.threshold));
        if (d.verdict == Verdict::algorithm) {
            // anything easier under the same prediction must also pass
            const double easier_raw = pred == ClassLabel::class1 ? raw + 0.5 : raw - 0.5;
            CHECK(gate_case(easier_raw, pred, cert).verdict == Verdict::algorithm);
        }
    }
}

TEST_CASE("class1 gating equals sign-flipped class2-style comparison") {
    const auto cert = mimic_cert();
    for (double raw : {-1.5, -0.43, 0.0, 0.42, 0.44, 2.0}) {
        const auto d = gate_case(raw, ClassLabel::class1, cert);
        const bool manual = -raw <= cert.mlc_class1;
        CHECK((d.verdict == Verdict::algorithm) == manual);
    }
}

TEST_CASE("certificate json round-trip") {
    auto cert = pulsar_cert();
    cert.reliability = 0.98;
    cert.created = "2026-01-01T00:00:00Z";
    const auto restored = MlcCertificate::from_json(cert.to_json());
    CHECK(restored.model_id == cert.model_id);
    CHECK(restored.mlc_class1 == cert.mlc_class1);
    CHECK(restored.mlc_class2 == cert.mlc_class2);
    CHECK(restored.reliability == cert.reliability);
    CHECK(restored.created == cert.created);
}

TEST_CASE("decision json names the verdict") {
    const auto d = gate_case(0.80, ClassLabel::class2, mimic_cert(), "case_x");
    const auto j = d.to_json();
    CHECK(j.at("case_id") == "case_x");
    CHECK(j.at("verdict") == "human_review");
    CHECK(j.at("predicted_class") == "class2");
    CHECK(j.at("threshold") == doctest::Approx(0.78));
}

TEST_CASE("gated accuracy over an oracle-gated test set") {
    // logistic model on one feature; class2 iff feature > 0
    classifier::TrainedModel model;
    model.activation = classifier::Activation::sigmoid;
    model.hidden_units = 0;
    model.n_features = 1;
    model.w2 = {8.0};
    model.b2 = 0.0;

    classifier::Dataset test;
    std::vector<cdi::CdiRecord> cdis;
    Rng rng(15);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int i = 0; i < 400; ++i) {
        const double x = normal(rng);
        test.case_ids.push_back("t" + std::to_string(i));
        test.features.push_back({x});
        test.labels.push_back(x > 0 ? ClassLabel::class2 : ClassLabel::class1);
        cdi::CdiRecord r;
        r.case_id = test.case_ids.back();
        // easy when far from the boundary
        r.raw_cdi = 1.0 - std::fabs(x);
        r.oriented_cdi = r.raw_cdi;
        r.class_label = test.labels.back();
        r.oriented = false;
        cdis.push_back(r);
    }

    MlcCertificate cert;
    cert.mlc_class1 = 0.5;
    cert.mlc_class2 = 0.5;
    const auto acc = gated_accuracy(test, cdis, cert, model);
    REQUIRE(acc.class1.has_value());
    REQUIRE(acc.class2.has_value());
    CHECK(acc.n_gated_class1 > 0);
    CHECK(acc.n_gated_class2 > 0);
    // the model is an oracle away from x = 0, so gated cases are all correct
    CHECK(*acc.class1 == doctest::Approx(1.0));
    CHECK(*acc.class2 == doctest::Approx(1.0));
}

TEST_CASE("empty gate set reports absent accuracies") {
    classifier::TrainedModel model;
    model.activation = classifier::Activation::sigmoid;
    model.hidden_units = 0;
    model.n_features = 1;
    model.w2 = {1.0};

    classifier::Dataset test;
    std::vector<cdi::CdiRecord> cdis;
    test.case_ids = {"t0"};
    test.features = {{0.3}};
    test.labels = {ClassLabel::class2};
    cdi::CdiRecord r;
    r.case_id = "t0";
    r.raw_cdi = r.oriented_cdi = 5.0;  // far above any threshold
    r.class_label = ClassLabel::class2;
    cdis.push_back(r);

    MlcCertificate cert;
    cert.mlc_class1 = 0.0;
    cert.mlc_class2 = 0.0;
    const auto acc = gated_accuracy(test, cdis, cert, model);
    CHECK_FALSE(acc.class1.has_value());
    CHECK_FALSE(acc.class2.has_value());
    CHECK(acc.n_gated_class1 == 0);
    CHECK(acc.n_gated_class2 == 0);
}

TEST_SUITE_END();
