#include "mlc/irt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

namespace mlc::irt {

namespace {

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double clamp(double x, double lo, double hi) { return std::min(std::max(x, lo), hi); }

double safe_log(double p) { return std::log(std::max(p, 1e-300)); }

double logit(double p) {
    p = clamp(p, 1e-3, 1.0 - 1e-3);
    return std::log(p / (1.0 - p));
}

// Gaussian elimination with partial pivoting; returns false when singular.
bool solve_dense(std::vector<std::vector<double>> a, std::vector<double>& b) {
    const std::size_t n = b.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
        if (std::fabs(a[piv][col]) < 1e-12) return false;
        std::swap(a[piv], a[col]);
        std::swap(b[piv], b[col]);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a[r][col] / a[col][col];
            for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t c = i + 1; c < n; ++c) s -= a[i][c] * b[c];
        b[i] = s / a[i][i];
    }
    return true;
}

void validate_matrix(const ResponseMatrix& rm, int n_categories) {
    if (rm.codes.size() != rm.case_ids.size())
        throw MlcError("response matrix: case id / row count mismatch");
    if (rm.n_items() < 2) throw MlcError("fit requires at least 2 items");
    for (std::size_t s = 0; s < rm.n_cases(); ++s) {
        if (rm.codes[s].size() != rm.n_items())
            throw MlcError("ragged response matrix at case " + rm.case_ids[s]);
        for (int c : rm.codes[s])
            if (c < 0 || c >= n_categories)
                throw MlcError("code out of range for case " + rm.case_ids[s]);
    }
}

}  // namespace

const char* to_string(ModelKind k) {
    return k == ModelKind::dichotomous ? "dichotomous" : "graded";
}

ModelKind model_kind_from_string(const std::string& s) {
    if (s == "dichotomous") return ModelKind::dichotomous;
    if (s == "graded") return ModelKind::graded;
    throw MlcError("unknown model kind: " + s);
}

double prob_correct_2pl(double theta, const DichotomousItem& item) {
    return sigmoid(item.discrimination * (theta - item.difficulty));
}

std::vector<double> category_probs_grm(double theta, const GradedItem& item) {
    const std::size_t m = item.thresholds.size();
    if (m == 0) throw MlcError("graded item has no thresholds");
    for (std::size_t j = 1; j < m; ++j)
        if (!(item.thresholds[j] > item.thresholds[j - 1]))
            throw MlcError("graded item thresholds not strictly increasing");

    // cumulative curves, cum[j] = P(X >= j); cum[0] = 1, cum[m+1] = 0
    std::vector<double> cum(m + 2);
    cum[0] = 1.0;
    for (std::size_t j = 0; j < m; ++j)
        cum[j + 1] = sigmoid(item.discrimination * (theta - item.thresholds[j]));
    cum[m + 1] = 0.0;

    std::vector<double> probs(m + 1);
    for (std::size_t j = 0; j <= m; ++j) probs[j] = std::max(cum[j] - cum[j + 1], 0.0);
    return probs;
}

QuadratureGrid make_normal_grid(int points, double lo, double hi) {
    if (points < 2) throw MlcError("quadrature grid needs >= 2 points");
    QuadratureGrid g;
    g.nodes.resize(points);
    g.weights.resize(points);
    double total = 0.0;
    for (int q = 0; q < points; ++q) {
        const double x = lo + (hi - lo) * q / (points - 1);
        g.nodes[q] = x;
        g.weights[q] = std::exp(-0.5 * x * x);
        total += g.weights[q];
    }
    for (double& w : g.weights) w /= total;
    return g;
}

// ---------------------------------------------------------------- fit_2pl --

FitResult fit_2pl(const ResponseMatrix& rm, const FitConfig& config) {
    validate_matrix(rm, 2);
    const std::size_t n_items = rm.n_items();
    const std::size_t n_cases = rm.n_cases();

    // degenerate columns have no information to separate alpha from beta
    std::vector<double> prop(n_items, 0.0);
    for (std::size_t i = 0; i < n_items; ++i) {
        std::size_t ones = 0;
        for (std::size_t s = 0; s < n_cases; ++s) ones += rm.codes[s][i];
        if (ones == 0 || ones == n_cases)
            throw MlcError("degenerate item " + std::to_string(i) + ": constant column");
        prop[i] = static_cast<double>(ones) / n_cases;
    }

    const QuadratureGrid grid =
        make_normal_grid(config.quadrature_points, config.quad_lo, config.quad_hi);
    const std::size_t nq = grid.nodes.size();

    std::vector<DichotomousItem> items(n_items);
    for (std::size_t i = 0; i < n_items; ++i) {
        items[i].discrimination = 1.0;
        items[i].difficulty = -logit(prop[i]);
    }

    FitResult result;
    std::vector<std::vector<double>> log_p(n_items, std::vector<double>(nq));
    std::vector<std::vector<double>> log_q(n_items, std::vector<double>(nq));
    std::vector<double> nexp(nq);                                   // expected case mass per node
    std::vector<std::vector<double>> rexp(n_items, std::vector<double>(nq));
    std::vector<double> post(nq);

    for (int iter = 0; iter < config.max_iter; ++iter) {
        for (std::size_t i = 0; i < n_items; ++i)
            for (std::size_t q = 0; q < nq; ++q) {
                const double p = prob_correct_2pl(grid.nodes[q], items[i]);
                log_p[i][q] = safe_log(p);
                log_q[i][q] = safe_log(1.0 - p);
            }

        std::fill(nexp.begin(), nexp.end(), 0.0);
        for (auto& r : rexp) std::fill(r.begin(), r.end(), 0.0);
        double marginal_ll = 0.0;

        for (std::size_t s = 0; s < n_cases; ++s) {
            double best = -std::numeric_limits<double>::infinity();
            for (std::size_t q = 0; q < nq; ++q) {
                double ll = std::log(grid.weights[q]);
                for (std::size_t i = 0; i < n_items; ++i)
                    ll += rm.codes[s][i] ? log_p[i][q] : log_q[i][q];
                post[q] = ll;
                best = std::max(best, ll);
            }
            double norm = 0.0;
            for (std::size_t q = 0; q < nq; ++q) {
                post[q] = std::exp(post[q] - best);
                norm += post[q];
            }
            marginal_ll += best + std::log(norm);
            for (std::size_t q = 0; q < nq; ++q) {
                const double w = post[q] / norm;
                nexp[q] += w;
                for (std::size_t i = 0; i < n_items; ++i)
                    if (rm.codes[s][i]) rexp[i][q] += w;
            }
        }
        result.log_likelihood_trace.push_back(marginal_ll);

        // M-step: per-item 2-parameter Newton with step halving
        double max_change = 0.0;
        for (std::size_t i = 0; i < n_items; ++i) {
            double a = items[i].discrimination;
            double b = items[i].difficulty;
            auto objective = [&](double aa, double bb) {
                double g = 0.0;
                for (std::size_t q = 0; q < nq; ++q) {
                    const double p = sigmoid(aa * (grid.nodes[q] - bb));
                    g += rexp[i][q] * safe_log(p) + (nexp[q] - rexp[i][q]) * safe_log(1.0 - p);
                }
                return g;
            };
            double g0 = objective(a, b);
            for (int newton = 0; newton < 8; ++newton) {
                double da = 0.0, db = 0.0, haa = 0.0, hbb = 0.0, hab = 0.0;
                for (std::size_t q = 0; q < nq; ++q) {
                    const double t = grid.nodes[q];
                    const double p = sigmoid(a * (t - b));
                    const double resid = rexp[i][q] - nexp[q] * p;
                    const double info = nexp[q] * p * (1.0 - p);
                    da += resid * (t - b);
                    db += -a * resid;
                    haa += -info * (t - b) * (t - b);
                    hbb += -a * a * info;
                    hab += a * info * (t - b) - resid;
                }
                if (std::fabs(da) < 1e-10 && std::fabs(db) < 1e-10) break;
                std::vector<std::vector<double>> h = {{haa, hab}, {hab, hbb}};
                std::vector<double> step = {da, db};
                if (!solve_dense(h, step)) break;
                // Newton step is -H^{-1} g
                double step_a = -step[0], step_b = -step[1];
                double scale = 1.0;
                bool accepted = false;
                for (int half = 0; half < 20; ++half) {
                    const double na = clamp(a + scale * step_a, config.min_discrimination,
                                            config.max_discrimination);
                    const double nb = clamp(b + scale * step_b, -10.0, 10.0);
                    const double g1 = objective(na, nb);
                    if (g1 >= g0 - 1e-12) {
                        a = na;
                        b = nb;
                        g0 = g1;
                        accepted = true;
                        break;
                    }
                    scale *= 0.5;
                }
                if (!accepted) break;
            }
            max_change = std::max(max_change, std::fabs(a - items[i].discrimination));
            max_change = std::max(max_change, std::fabs(b - items[i].difficulty));
            items[i].discrimination = a;
            items[i].difficulty = b;
        }

        result.iterations = iter + 1;
        if (max_change < config.tol) {
            result.converged = true;
            break;
        }
    }

    result.bank.model_kind = ModelKind::dichotomous;
    result.bank.n_categories = 2;
    result.bank.dichotomous = std::move(items);
    return result;
}

// ---------------------------------------------------------------- fit_grm --

namespace {

struct GrmItemData {
    int n_cats = 0;                       // observed categories after collapse
    std::vector<int> remap;               // original code -> collapsed code
};

// Expected-count log-likelihood for one graded item over the grid.
// counts[j][q] = expected number of cases in category j at node q.
double grm_objective(const std::vector<std::vector<double>>& counts,
                     const QuadratureGrid& grid, double a,
                     const std::vector<double>& thresholds) {
    const std::size_t m = thresholds.size();
    double g = 0.0;
    for (std::size_t q = 0; q < grid.nodes.size(); ++q) {
        const double t = grid.nodes[q];
        double prev = 1.0;
        for (std::size_t j = 0; j <= m; ++j) {
            const double next = (j == m) ? 0.0 : sigmoid(a * (t - thresholds[j]));
            g += counts[j][q] * safe_log(std::max(prev - next, 0.0));
            prev = next;
        }
    }
    return g;
}

void grm_gradient(const std::vector<std::vector<double>>& counts,
                  const QuadratureGrid& grid, double a,
                  const std::vector<double>& thresholds, std::vector<double>& grad) {
    const std::size_t m = thresholds.size();
    grad.assign(m + 1, 0.0);
    for (std::size_t q = 0; q < grid.nodes.size(); ++q) {
        const double t = grid.nodes[q];
        std::vector<double> cum(m + 2);
        cum[0] = 1.0;
        for (std::size_t j = 0; j < m; ++j) cum[j + 1] = sigmoid(a * (t - thresholds[j]));
        cum[m + 1] = 0.0;
        std::vector<double> ratio(m + 1);
        for (std::size_t j = 0; j <= m; ++j)
            ratio[j] = counts[j][q] / std::max(cum[j] - cum[j + 1], 1e-12);
        // alpha: d cum[j+1]/da = (t - b_j) cum (1 - cum)
        for (std::size_t j = 0; j < m; ++j) {
            const double d = cum[j + 1] * (1.0 - cum[j + 1]);
            grad[0] += (t - thresholds[j]) * d * (ratio[j] - ratio[j + 1]);
            // threshold b_j: d cum[j+1]/db_j = -a * d
            grad[1 + j] += a * d * (ratio[j + 1] - ratio[j]);
        }
    }
}

}  // namespace

FitResult fit_grm(const ResponseMatrix& rm, const FitConfig& config) {
    if (rm.n_items() < 2) throw MlcError("fit requires at least 2 items");
    const std::size_t n_items = rm.n_items();
    const std::size_t n_cases = rm.n_cases();

    int max_code = 0;
    for (const auto& row : rm.codes)
        for (int c : row) max_code = std::max(max_code, c);
    const int declared_cats = max_code + 1;
    validate_matrix(rm, declared_cats);

    FitResult result;

    // collapse unseen categories into their lower neighbor (upper for cat 0)
    std::vector<GrmItemData> item_data(n_items);
    std::vector<std::vector<int>> codes = rm.codes;
    for (std::size_t i = 0; i < n_items; ++i) {
        std::vector<std::size_t> seen(declared_cats, 0);
        for (std::size_t s = 0; s < n_cases; ++s) ++seen[codes[s][i]];
        auto& d = item_data[i];
        d.remap.resize(declared_cats);
        int next = -1;
        for (int c = 0; c < declared_cats; ++c) {
            if (seen[c] > 0) {
                ++next;
            } else {
                result.remaps.push_back({i, c, std::max(next, 0)});
            }
            d.remap[c] = std::max(next, 0);
        }
        d.n_cats = next + 1;
        if (d.n_cats < 2)
            throw MlcError("degenerate item " + std::to_string(i) +
                           ": fewer than 2 observed categories");
        for (std::size_t s = 0; s < n_cases; ++s) codes[s][i] = d.remap[codes[s][i]];
    }

    const QuadratureGrid grid =
        make_normal_grid(config.quadrature_points, config.quad_lo, config.quad_hi);
    const std::size_t nq = grid.nodes.size();

    // initialize from inverse-logistic cumulative category proportions
    std::vector<GradedItem> items(n_items);
    for (std::size_t i = 0; i < n_items; ++i) {
        const int m = item_data[i].n_cats - 1;
        items[i].discrimination = 1.0;
        items[i].thresholds.resize(m);
        std::vector<double> counts(item_data[i].n_cats, 0.0);
        for (std::size_t s = 0; s < n_cases; ++s) counts[codes[s][i]] += 1.0;
        double above = n_cases;
        for (int j = 0; j < m; ++j) {
            above -= counts[j];
            items[i].thresholds[j] = -logit(above / n_cases);
        }
        for (int j = 1; j < m; ++j)  // strictly increasing even under ties
            if (items[i].thresholds[j] <= items[i].thresholds[j - 1])
                items[i].thresholds[j] = items[i].thresholds[j - 1] + 1e-3;
    }

    // per-item per-node per-category probability table
    auto rebuild_probs = [&](std::vector<std::vector<std::vector<double>>>& lp) {
        for (std::size_t i = 0; i < n_items; ++i)
            for (std::size_t q = 0; q < nq; ++q) {
                const auto probs = category_probs_grm(grid.nodes[q], items[i]);
                for (int j = 0; j < item_data[i].n_cats; ++j)
                    lp[i][q][j] = safe_log(probs[j]);
            }
    };
    std::vector<std::vector<std::vector<double>>> lp(n_items);
    for (std::size_t i = 0; i < n_items; ++i)
        lp[i].assign(nq, std::vector<double>(item_data[i].n_cats));

    std::vector<double> post(nq);
    for (int iter = 0; iter < config.max_iter; ++iter) {
        rebuild_probs(lp);

        // E-step: expected counts per item x category x node
        std::vector<std::vector<std::vector<double>>> counts(n_items);
        for (std::size_t i = 0; i < n_items; ++i)
            counts[i].assign(item_data[i].n_cats, std::vector<double>(nq, 0.0));
        double marginal_ll = 0.0;
        for (std::size_t s = 0; s < n_cases; ++s) {
            double best = -std::numeric_limits<double>::infinity();
            for (std::size_t q = 0; q < nq; ++q) {
                double ll = std::log(grid.weights[q]);
                for (std::size_t i = 0; i < n_items; ++i) ll += lp[i][q][codes[s][i]];
                post[q] = ll;
                best = std::max(best, ll);
            }
            double norm = 0.0;
            for (std::size_t q = 0; q < nq; ++q) {
                post[q] = std::exp(post[q] - best);
                norm += post[q];
            }
            marginal_ll += best + std::log(norm);
            for (std::size_t q = 0; q < nq; ++q) {
                const double w = post[q] / norm;
                for (std::size_t i = 0; i < n_items; ++i) counts[i][codes[s][i]][q] += w;
            }
        }
        result.log_likelihood_trace.push_back(marginal_ll);

        // M-step: per-item Newton (finite-difference Hessian of the analytic
        // gradient) with backtracking; falls back to scaled gradient ascent
        double max_change = 0.0;
        for (std::size_t i = 0; i < n_items; ++i) {
            const std::size_t m = items[i].thresholds.size();
            double a = items[i].discrimination;
            std::vector<double> b = items[i].thresholds;
            double g0 = grm_objective(counts[i], grid, a, b);

            for (int newton = 0; newton < 8; ++newton) {
                std::vector<double> grad;
                grm_gradient(counts[i], grid, a, b, grad);
                double gnorm = 0.0;
                for (double g : grad) gnorm = std::max(gnorm, std::fabs(g));
                if (gnorm < 1e-9) break;

                const std::size_t dim = m + 1;
                std::vector<std::vector<double>> hess(dim, std::vector<double>(dim));
                const double h = 1e-5;
                for (std::size_t k = 0; k < dim; ++k) {
                    double ap = a, am = a;
                    std::vector<double> bp = b, bm = b;
                    if (k == 0) {
                        ap += h;
                        am -= h;
                    } else {
                        bp[k - 1] += h;
                        bm[k - 1] -= h;
                    }
                    std::vector<double> gp, gm;
                    grm_gradient(counts[i], grid, ap, bp, gp);
                    grm_gradient(counts[i], grid, am, bm, gm);
                    for (std::size_t r = 0; r < dim; ++r)
                        hess[r][k] = (gp[r] - gm[r]) / (2.0 * h);
                }
                std::vector<double> step = grad;
                bool solved = solve_dense(hess, step);
                if (solved)
                    for (double& s : step) s = -s;
                else
                    for (std::size_t k = 0; k < step.size(); ++k)
                        step[k] = grad[k] * 0.1;  // gradient ascent fallback

                double scale = 1.0;
                bool accepted = false;
                for (int half = 0; half < 25; ++half) {
                    const double na = clamp(a + scale * step[0], config.min_discrimination,
                                            config.max_discrimination);
                    std::vector<double> nb = b;
                    bool ordered = true;
                    for (std::size_t k = 0; k < m; ++k) {
                        nb[k] = clamp(b[k] + scale * step[1 + k], -10.0, 10.0);
                        if (k > 0 && nb[k] <= nb[k - 1] + 1e-6) ordered = false;
                    }
                    if (ordered) {
                        const double g1 = grm_objective(counts[i], grid, na, nb);
                        if (g1 >= g0 - 1e-12) {
                            a = na;
                            b = std::move(nb);
                            g0 = g1;
                            accepted = true;
                            break;
                        }
                    }
                    scale *= 0.5;
                }
                if (!accepted) break;
            }

            max_change = std::max(max_change, std::fabs(a - items[i].discrimination));
            for (std::size_t k = 0; k < m; ++k)
                max_change = std::max(max_change, std::fabs(b[k] - items[i].thresholds[k]));
            items[i].discrimination = a;
            items[i].thresholds = std::move(b);
        }

        result.iterations = iter + 1;
        if (max_change < config.tol) {
            result.converged = true;
            break;
        }
    }

    result.bank.model_kind = ModelKind::graded;
    result.bank.n_categories = declared_cats;
    result.bank.graded = std::move(items);
    return result;
}

// ------------------------------------------------------------- simulation --

std::pair<ResponseMatrix, std::vector<double>>
simulate_responses(const ItemBank& bank, int n_cases, std::uint64_t seed) {
    if (bank.size() == 0) throw MlcError("cannot simulate from an empty bank");
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    ResponseMatrix rm;
    std::vector<double> thetas(n_cases);
    rm.case_ids.reserve(n_cases);
    rm.codes.reserve(n_cases);
    for (int s = 0; s < n_cases; ++s) {
        const double theta = normal(rng);
        thetas[s] = theta;
        rm.case_ids.push_back("sim_" + std::to_string(s));
        std::vector<int> row;
        row.reserve(bank.size());
        if (bank.model_kind == ModelKind::dichotomous) {
            for (const auto& item : bank.dichotomous)
                row.push_back(unif(rng) < prob_correct_2pl(theta, item) ? 1 : 0);
        } else {
            for (const auto& item : bank.graded) {
                const auto probs = category_probs_grm(theta, item);
                const double u = unif(rng);
                double acc = 0.0;
                int code = static_cast<int>(probs.size()) - 1;
                for (std::size_t j = 0; j < probs.size(); ++j) {
                    acc += probs[j];
                    if (u < acc) {
                        code = static_cast<int>(j);
                        break;
                    }
                }
                row.push_back(code);
            }
        }
        rm.codes.push_back(std::move(row));
    }
    return {std::move(rm), std::move(thetas)};
}

// ---------------------------------------------------------- serialization --

nlohmann::json ItemBank::to_json() const {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["model_kind"] = to_string(model_kind);
    j["n_categories"] = n_categories;
    auto& arr = j["items"] = nlohmann::json::array();
    if (model_kind == ModelKind::dichotomous) {
        for (const auto& it : dichotomous)
            arr.push_back({{"discrimination", it.discrimination}, {"difficulty", it.difficulty}});
    } else {
        for (const auto& it : graded)
            arr.push_back({{"discrimination", it.discrimination}, {"thresholds", it.thresholds}});
    }
    return j;
}

ItemBank ItemBank::from_json(const nlohmann::json& j) {
    ItemBank bank;
    bank.model_kind = model_kind_from_string(j.at("model_kind").get<std::string>());
    bank.n_categories = j.at("n_categories").get<int>();
    for (const auto& it : j.at("items")) {
        if (bank.model_kind == ModelKind::dichotomous) {
            bank.dichotomous.push_back(
                {it.at("discrimination").get<double>(), it.at("difficulty").get<double>()});
        } else {
            GradedItem g;
            g.discrimination = it.at("discrimination").get<double>();
            g.thresholds = it.at("thresholds").get<std::vector<double>>();
            bank.graded.push_back(std::move(g));
        }
    }
    if (bank.size() == 0) throw MlcError("item bank document has no items");
    return bank;
}

void ItemBank::save(const std::string& path) const {
    write_text_file(path, to_json().dump(2) + "\n");
}

ItemBank ItemBank::load(const std::string& path) {
    return from_json(nlohmann::json::parse(read_text_file(path)));
}

FitConfig FitConfig::from_json(const nlohmann::json& j) {
    FitConfig c;
    if (j.contains("quadrature_points")) c.quadrature_points = j["quadrature_points"].get<int>();
    if (j.contains("quad_lo")) c.quad_lo = j["quad_lo"].get<double>();
    if (j.contains("quad_hi")) c.quad_hi = j["quad_hi"].get<double>();
    if (j.contains("tol")) c.tol = j["tol"].get<double>();
    if (j.contains("max_iter")) c.max_iter = j["max_iter"].get<int>();
    return c;
}

}  // namespace mlc::irt
