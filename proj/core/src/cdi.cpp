#include "mlc/cdi.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mlc::cdi {

namespace {

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

void check_length(std::span<const int> responses, const irt::ItemBank& bank) {
    if (responses.size() != bank.size())
        throw MlcError("response vector length " + std::to_string(responses.size()) +
                       " does not match bank size " + std::to_string(bank.size()));
}

// d/dtheta of the case log-likelihood. Concave in theta for both models,
// so the derivative is decreasing and brackets the MLE.
double log_likelihood_deriv(double theta, std::span<const int> responses,
                            const irt::ItemBank& bank) {
    double d = 0.0;
    if (bank.model_kind == irt::ModelKind::dichotomous) {
        for (std::size_t i = 0; i < bank.dichotomous.size(); ++i) {
            const auto& item = bank.dichotomous[i];
            d += item.discrimination *
                 (responses[i] - irt::prob_correct_2pl(theta, item));
        }
    } else {
        for (std::size_t i = 0; i < bank.graded.size(); ++i) {
            const auto& item = bank.graded[i];
            const std::size_t m = item.thresholds.size();
            const auto j = static_cast<std::size_t>(responses[i]);
            // P_j = c_j - c_{j+1}; dc_k/dtheta = a c_k (1 - c_k), c_0 = 1, c_{m+1} = 0
            const double cj = (j == 0) ? 1.0
                                       : sigmoid(item.discrimination *
                                                 (theta - item.thresholds[j - 1]));
            const double cj1 = (j == m) ? 0.0
                                        : sigmoid(item.discrimination *
                                                  (theta - item.thresholds[j]));
            const double dj = (j == 0) ? 0.0 : item.discrimination * cj * (1.0 - cj);
            const double dj1 = (j == m) ? 0.0 : item.discrimination * cj1 * (1.0 - cj1);
            d += (dj - dj1) / std::max(cj - cj1, 1e-300);
        }
    }
    return d;
}

}  // namespace

double case_log_likelihood(double theta, std::span<const int> responses,
                           const irt::ItemBank& bank) {
    check_length(responses, bank);
    double ll = 0.0;
    if (bank.model_kind == irt::ModelKind::dichotomous) {
        for (std::size_t i = 0; i < bank.dichotomous.size(); ++i) {
            const double p = irt::prob_correct_2pl(theta, bank.dichotomous[i]);
            ll += responses[i] ? std::log(std::max(p, 1e-300))
                               : std::log(std::max(1.0 - p, 1e-300));
        }
    } else {
        for (std::size_t i = 0; i < bank.graded.size(); ++i) {
            const auto probs = irt::category_probs_grm(theta, bank.graded[i]);
            const auto j = static_cast<std::size_t>(responses[i]);
            if (j >= probs.size())
                throw MlcError("response code out of range for graded item " +
                               std::to_string(i));
            ll += std::log(std::max(probs[j], 1e-300));
        }
    }
    return ll;
}

ThetaEstimate estimate_cdi(std::span<const int> responses, const irt::ItemBank& bank) {
    check_length(responses, bank);
    ThetaEstimate est;

    double lo = -kThetaClamp, hi = kThetaClamp;
    const double d_lo = log_likelihood_deriv(lo, responses, bank);
    const double d_hi = log_likelihood_deriv(hi, responses, bank);
    if (d_lo <= 0.0) {  // likelihood decreasing over the whole range
        est.theta = lo;
        est.clamped = true;
        return est;
    }
    if (d_hi >= 0.0) {  // increasing everywhere: perfect / all-extreme pattern
        est.theta = hi;
        est.clamped = true;
        return est;
    }

    double theta = 0.0;
    bool done = false;
    for (int iter = 0; iter < 100; ++iter) {
        const double d = log_likelihood_deriv(theta, responses, bank);
        if (std::fabs(d) < 1e-12) {
            done = true;
            break;
        }
        if (d > 0.0)
            lo = theta;
        else
            hi = theta;
        const double h = 1e-5;
        const double d2 = (log_likelihood_deriv(theta + h, responses, bank) -
                           log_likelihood_deriv(theta - h, responses, bank)) /
                          (2.0 * h);
        double next;
        if (d2 < -1e-12) {
            next = theta - d / d2;
            if (next <= lo || next >= hi) next = 0.5 * (lo + hi);  // safeguard
        } else {
            next = 0.5 * (lo + hi);
        }
        const double step = std::fabs(next - theta);
        theta = next;
        if (step < 1e-9 || hi - lo < 1e-9) {
            done = true;
            break;
        }
    }
    est.theta = theta;
    est.converged = done;
    return est;
}

std::vector<CdiRecord> estimate_all(const irt::ResponseMatrix& responses,
                                    const irt::ItemBank& bank) {
    std::vector<CdiRecord> out;
    out.reserve(responses.n_cases());
    for (std::size_t s = 0; s < responses.n_cases(); ++s) {
        const auto est = estimate_cdi(responses.codes[s], bank);
        CdiRecord rec;
        rec.case_id = responses.case_ids[s];
        rec.raw_cdi = est.theta;
        rec.oriented_cdi = est.theta;
        rec.converged = est.converged;
        rec.clamped = est.clamped;
        if (s < responses.class_labels.size()) rec.class_label = responses.class_labels[s];
        out.push_back(std::move(rec));
    }
    return out;
}

std::vector<CdiRecord> orient_cdis(std::vector<CdiRecord> records) {
    for (const auto& r : records)
        if (r.oriented)
            throw MlcError("orient_cdis: record " + r.case_id + " already oriented");
    for (auto& r : records) {
        r.oriented_cdi = (r.class_label == ClassLabel::class1) ? -r.raw_cdi : r.raw_cdi;
        r.oriented = true;
    }
    return records;
}

double bin_lower_edge(double oriented_cdi) {
    return std::floor(oriented_cdi / kBinWidth) * kBinWidth;
}

std::vector<CdiBin> bin_cdis(const std::vector<CdiRecord>& records) {
    std::vector<CdiBin> bins;
    for (const auto& r : records) {
        const double lower = bin_lower_edge(r.oriented_cdi);
        auto it = std::find_if(bins.begin(), bins.end(), [&](const CdiBin& b) {
            return std::fabs(b.lower_edge - lower) < 1e-9;
        });
        if (it == bins.end()) {
            bins.push_back({lower, lower + kBinWidth, {}});
            it = std::prev(bins.end());
        }
        it->member_ids.push_back(r.case_id);
    }
    std::sort(bins.begin(), bins.end(),
              [](const CdiBin& a, const CdiBin& b) { return a.lower_edge < b.lower_edge; });
    return bins;
}

std::string to_csv(const std::vector<CdiRecord>& records) {
    std::ostringstream out;
    out << "case_id,class_label,raw_cdi,oriented_cdi,bin_lower,converged,clamped\n";
    out.precision(17);
    for (const auto& r : records) {
        out << r.case_id << ',' << to_string(r.class_label) << ',' << r.raw_cdi << ','
            << r.oriented_cdi << ',' << bin_lower_edge(r.oriented_cdi) << ','
            << (r.converged ? 1 : 0) << ',' << (r.clamped ? 1 : 0) << '\n';
    }
    return out.str();
}

std::vector<CdiRecord> from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw MlcError("empty CDI csv");
    std::vector<CdiRecord> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() < 7) throw MlcError("malformed CDI csv row: " + line);
        CdiRecord r;
        r.case_id = f[0];
        r.class_label = class_label_from_string(f[1]);
        r.raw_cdi = std::stod(f[2]);
        r.oriented_cdi = std::stod(f[3]);
        r.converged = f[5] == "1";
        r.clamped = f[6] == "1";
        r.oriented = true;
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace mlc::cdi
