#include "mlc/classifier.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <limits>
#include <cmath>
#include <future>
#include <iostream>
#include <numeric>
#include <thread>

#include <nlohmann/json.hpp>

namespace mlc::classifier {

namespace {

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// elementwise activations; softmax handled separately (couples the units)
double act_forward(Activation a, double z) {
    switch (a) {
        case Activation::softplus: return z > 30.0 ? z : std::log1p(std::exp(z));
        case Activation::softsign: return z / (1.0 + std::fabs(z));
        case Activation::relu: return z > 0.0 ? z : 0.0;
        case Activation::tanh: return std::tanh(z);
        case Activation::sigmoid: return sigmoid(z);
        case Activation::hard_sigmoid: return std::clamp(0.2 * z + 0.5, 0.0, 1.0);
        default: return z;
    }
}

double act_deriv(Activation a, double z, double h) {
    switch (a) {
        case Activation::softplus: return sigmoid(z);
        case Activation::softsign: {
            const double d = 1.0 + std::fabs(z);
            return 1.0 / (d * d);
        }
        case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
        case Activation::tanh: return 1.0 - h * h;
        case Activation::sigmoid: return h * (1.0 - h);
        case Activation::hard_sigmoid: return (z > -2.5 && z < 2.5) ? 0.2 : 0.0;
        default: return 1.0;
    }
}

void hidden_forward(const TrainedModel& m, std::span<const double> x,
                    std::vector<double>& z, std::vector<double>& h) {
    const int nh = m.hidden_units;
    z.resize(nh);
    h.resize(nh);
    for (int j = 0; j < nh; ++j) {
        double s = m.b1[j];
        for (std::size_t k = 0; k < m.n_features; ++k) s += m.w1[j * m.n_features + k] * x[k];
        z[j] = s;
    }
    if (m.activation == Activation::softmax) {
        const double zmax = *std::max_element(z.begin(), z.end());
        double total = 0.0;
        for (int j = 0; j < nh; ++j) {
            h[j] = std::exp(z[j] - zmax);
            total += h[j];
        }
        for (int j = 0; j < nh; ++j) h[j] /= total;
    } else {
        for (int j = 0; j < nh; ++j) h[j] = act_forward(m.activation, z[j]);
    }
}

double output_score(const TrainedModel& m, std::span<const double> x,
                    std::vector<double>& z, std::vector<double>& h) {
    if (m.hidden_units == 0) {
        double s = m.b2;
        for (std::size_t k = 0; k < m.n_features; ++k) s += m.w2[k] * x[k];
        return sigmoid(s);
    }
    hidden_forward(m, x, z, h);
    double s = m.b2;
    for (int j = 0; j < m.hidden_units; ++j) s += m.w2[j] * h[j];
    return sigmoid(s);
}

struct FitOutcome {
    TrainedModel model;
    bool finite = true;
};

FitOutcome fit(const Dataset& data, Activation act, int hidden, double lr,
               const TrainConfig& config, std::uint64_t seed) {
    TrainedModel m;
    m.activation = act;
    m.hidden_units = hidden;
    m.learning_rate = lr;
    m.n_features = data.features.empty() ? 0 : data.features[0].size();
    m.seed = seed;

    Rng rng(seed);
    std::uniform_real_distribution<double> unif(-0.5, 0.5);
    const double scale1 = 1.0 / std::sqrt(std::max<std::size_t>(m.n_features, 1));
    if (hidden > 0) {
        m.w1.resize(static_cast<std::size_t>(hidden) * m.n_features);
        m.b1.assign(hidden, 0.0);
        m.w2.resize(hidden);
        for (double& w : m.w1) w = unif(rng) * scale1;
        const double scale2 = 1.0 / std::sqrt(static_cast<double>(hidden));
        for (double& w : m.w2) w = unif(rng) * scale2;
    } else {
        m.w2.resize(m.n_features);
        for (double& w : m.w2) w = unif(rng) * scale1;
    }

    const std::size_t n = data.size();
    std::vector<double> y(n);
    for (std::size_t s = 0; s < n; ++s) y[s] = data.labels[s] == ClassLabel::class2 ? 1.0 : 0.0;

    std::vector<double> gw1(m.w1.size()), gb1(m.b1.size()), gw2(m.w2.size());
    std::vector<double> z, h;
    double best_loss = std::numeric_limits<double>::infinity();
    int stall = 0;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::fill(gw1.begin(), gw1.end(), 0.0);
        std::fill(gb1.begin(), gb1.end(), 0.0);
        std::fill(gw2.begin(), gw2.end(), 0.0);
        double gb2 = 0.0;
        double loss = 0.0;

        for (std::size_t s = 0; s < n; ++s) {
            const auto& x = data.features[s];
            const double o = output_score(m, x, z, h);
            loss -= y[s] * std::log(std::max(o, 1e-12)) +
                    (1.0 - y[s]) * std::log(std::max(1.0 - o, 1e-12));
            const double delta = o - y[s];  // dL/du, u = pre-sigmoid output
            gb2 += delta;
            if (m.hidden_units == 0) {
                for (std::size_t k = 0; k < m.n_features; ++k) gw2[k] += delta * x[k];
                continue;
            }
            for (int j = 0; j < m.hidden_units; ++j) gw2[j] += delta * h[j];
            if (m.activation == Activation::softmax) {
                // dL/dz_j through the softmax coupling
                double dot = 0.0;
                for (int j = 0; j < m.hidden_units; ++j) dot += m.w2[j] * h[j];
                for (int j = 0; j < m.hidden_units; ++j) {
                    const double dz = delta * h[j] * (m.w2[j] - dot);
                    gb1[j] += dz;
                    for (std::size_t k = 0; k < m.n_features; ++k)
                        gw1[j * m.n_features + k] += dz * x[k];
                }
            } else {
                for (int j = 0; j < m.hidden_units; ++j) {
                    const double dz = delta * m.w2[j] * act_deriv(m.activation, z[j], h[j]);
                    gb1[j] += dz;
                    for (std::size_t k = 0; k < m.n_features; ++k)
                        gw1[j * m.n_features + k] += dz * x[k];
                }
            }
        }

        loss /= static_cast<double>(n);
        if (!std::isfinite(loss)) return {std::move(m), false};
        m.final_loss = loss;
        m.epochs_run = epoch + 1;

        const double step = lr / static_cast<double>(n);
        for (std::size_t k = 0; k < m.w1.size(); ++k) m.w1[k] -= step * gw1[k];
        for (std::size_t k = 0; k < m.b1.size(); ++k) m.b1[k] -= step * gb1[k];
        for (std::size_t k = 0; k < m.w2.size(); ++k) m.w2[k] -= step * gw2[k];
        m.b2 -= step * gb2;

        if (loss < best_loss - config.early_stop_delta) {
            best_loss = loss;
            stall = 0;
        } else if (++stall >= config.early_stop_patience) {
            break;
        }
    }
    return {std::move(m), true};
}

double accuracy_on(const TrainedModel& m, const Dataset& data) {
    std::size_t correct = 0;
    for (std::size_t s = 0; s < data.size(); ++s)
        if (predict(m, data.features[s]).label == data.labels[s]) ++correct;
    return data.size() ? static_cast<double>(correct) / data.size() : 0.0;
}

Dataset subset(const Dataset& data, const std::vector<std::size_t>& idx) {
    Dataset out;
    for (std::size_t i : idx) {
        out.case_ids.push_back(data.case_ids.empty() ? "" : data.case_ids[i]);
        out.features.push_back(data.features[i]);
        out.labels.push_back(data.labels[i]);
    }
    return out;
}

}  // namespace

const char* to_string(Activation a) {
    switch (a) {
        case Activation::softmax: return "softmax";
        case Activation::softplus: return "softplus";
        case Activation::softsign: return "softsign";
        case Activation::relu: return "relu";
        case Activation::tanh: return "tanh";
        case Activation::sigmoid: return "sigmoid";
        case Activation::hard_sigmoid: return "hard_sigmoid";
    }
    return "?";
}

Activation activation_from_string(const std::string& s) {
    for (Activation a : {Activation::softmax, Activation::softplus, Activation::softsign,
                         Activation::relu, Activation::tanh, Activation::sigmoid,
                         Activation::hard_sigmoid})
        if (s == to_string(a)) return a;
    throw MlcError("unknown activation: " + s);
}

HyperGrid HyperGrid::defaults() {
    HyperGrid g;
    g.activations = {Activation::softmax,  Activation::softplus, Activation::softsign,
                     Activation::relu,     Activation::tanh,     Activation::sigmoid,
                     Activation::hard_sigmoid};
    g.learning_rates = {0.01, 0.1, 0.2, 0.3};
    g.hidden_units = {6, 8, 12, 18, 24, 30};
    return g;
}

HyperGrid HyperGrid::from_json(const nlohmann::json& j) {
    HyperGrid g;
    for (const auto& a : j.at("activations"))
        g.activations.push_back(activation_from_string(a.get<std::string>()));
    g.learning_rates = j.at("learning_rates").get<std::vector<double>>();
    g.hidden_units = j.at("hidden_units").get<std::vector<int>>();
    if (g.activations.empty() || g.learning_rates.empty() || g.hidden_units.empty())
        throw MlcError("hyper grid lists must be non-empty");
    return g;
}

TrainedModel train_single(const Dataset& train, Activation act, int hidden, double lr,
                          const TrainConfig& config) {
    if (train.size() == 0) throw MlcError("empty training set");
    auto out = fit(train, act, hidden, lr, config, derive_seed(config.seed, 0xf17));
    if (!out.finite) throw MlcError("training diverged (non-finite loss)");
    return std::move(out.model);
}

TrainedModel grid_search_train(const Dataset& train, const HyperGrid& grid,
                               const TrainConfig& config) {
    if (grid.activations.empty() || grid.learning_rates.empty() || grid.hidden_units.empty())
        throw MlcError("hyper grid lists must be non-empty");
    const std::size_t n = train.size();
    const auto folds = static_cast<std::size_t>(config.folds);
    if (n < folds * 2) throw MlcError("training set too small for cross-validation");

    std::size_t n1 = 0;
    for (auto l : train.labels) n1 += l == ClassLabel::class1;
    if (n1 * 5 < n || (n - n1) * 5 < n)
        std::cerr << "warning: training labels are strongly unbalanced (" << n1 << "/"
                  << n - n1 << ")\n";

    // fixed fold assignment shared by every grid cell
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng fold_rng(derive_seed(config.seed, 0xf01d));
    std::shuffle(order.begin(), order.end(), fold_rng);
    std::vector<std::vector<std::size_t>> fold_idx(folds);
    for (std::size_t i = 0; i < n; ++i) fold_idx[i % folds].push_back(order[i]);

    struct Cell {
        Activation act;
        double lr;
        int hidden;
        double score = -1.0;
        bool finite = true;
    };
    std::vector<Cell> cells;
    for (Activation a : grid.activations)
        for (double lr : grid.learning_rates)
            for (int h : grid.hidden_units) cells.push_back({a, lr, h});

    auto eval_cell = [&](std::size_t c) {
        auto& cell = cells[c];
        double acc_sum = 0.0;
        for (std::size_t f = 0; f < folds; ++f) {
            std::vector<std::size_t> tr, va = fold_idx[f];
            for (std::size_t g = 0; g < folds; ++g)
                if (g != f) tr.insert(tr.end(), fold_idx[g].begin(), fold_idx[g].end());
            const Dataset dtr = subset(train, tr), dva = subset(train, va);
            auto out = fit(dtr, cell.act, cell.hidden, cell.lr, config,
                           derive_seed(config.seed, 0x1000 + c * 101 + f));
            if (!out.finite) {
                cell.finite = false;
                return;
            }
            acc_sum += accuracy_on(out.model, dva);
        }
        cell.score = acc_sum / static_cast<double>(folds);
    };

    unsigned n_threads = config.threads > 0 ? static_cast<unsigned>(config.threads)
                                            : std::thread::hardware_concurrency();
    n_threads = std::max(1u, std::min<unsigned>(n_threads, cells.size()));
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    for (unsigned t = 0; t < n_threads; ++t)
        workers.emplace_back([&] {
            for (std::size_t c; (c = next.fetch_add(1)) < cells.size();) eval_cell(c);
        });
    for (auto& w : workers) w.join();

    // deterministic selection regardless of worker schedule
    const Cell* best = nullptr;
    for (const auto& cell : cells) {
        if (!cell.finite) continue;
        if (!best || cell.score > best->score ||
            (cell.score == best->score &&
             (cell.hidden < best->hidden ||
              (cell.hidden == best->hidden && cell.lr < best->lr))))
            best = &cell;
    }
    if (!best) {
        std::string log;
        for (const auto& cell : cells)
            log += std::string(to_string(cell.act)) + " lr=" + std::to_string(cell.lr) +
                   " h=" + std::to_string(cell.hidden) + ": diverged\n";
        throw MlcError("all grid cells diverged:\n" + log);
    }

    auto out = fit(train, best->act, best->hidden, best->lr, config,
                   derive_seed(config.seed, 0xf17));
    if (!out.finite) throw MlcError("final refit diverged");
    out.model.cv_accuracy = best->score;
    return std::move(out.model);
}

Prediction predict(const TrainedModel& model, std::span<const double> features) {
    if (features.size() != model.n_features)
        throw MlcError("feature length " + std::to_string(features.size()) +
                       " does not match model (" + std::to_string(model.n_features) + ")");
    std::vector<double> z, h;
    const double score = output_score(model, features, z, h);
    return {score >= 0.5 ? ClassLabel::class2 : ClassLabel::class1, score};
}

double auc_from_scores(std::span<const double> scores, std::span<const ClassLabel> labels,
                       ClassLabel positive) {
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // midranks over tied scores
    std::vector<double> rank(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double mid = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
        for (std::size_t k = i; k <= j; ++k) rank[order[k]] = mid;
        i = j + 1;
    }

    double rank_sum = 0.0;
    std::size_t n_pos = 0;
    for (std::size_t k = 0; k < n; ++k)
        if (labels[k] == positive) {
            rank_sum += rank[k];
            ++n_pos;
        }
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) throw MlcError("AUC needs both classes present");
    return (rank_sum - 0.5 * n_pos * (n_pos + 1)) / (static_cast<double>(n_pos) * n_neg);
}

MetricsReport traditional_metrics(const TrainedModel& model, const Dataset& test,
                                  ClassLabel positive) {
    if (test.size() == 0) throw MlcError("empty test set");
    const auto t0 = std::chrono::steady_clock::now();

    std::vector<double> scores(test.size());
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    for (std::size_t s = 0; s < test.size(); ++s) {
        const auto pred = predict(model, test.features[s]);
        scores[s] = pred.score;
        const bool truth_pos = test.labels[s] == positive;
        const bool pred_pos = pred.label == positive;
        if (pred_pos && truth_pos) ++tp;
        else if (pred_pos) ++fp;
        else if (truth_pos) ++fn;
        else ++tn;
    }

    MetricsReport r;
    r.n_cases = test.size();
    r.accuracy = static_cast<double>(tp + tn) / test.size();
    r.precision = (tp + fp) ? static_cast<double>(tp) / (tp + fp) : 0.0;
    r.recall = (tp + fn) ? static_cast<double>(tp) / (tp + fn) : 0.0;
    r.f1 = (r.precision + r.recall > 0.0)
               ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
               : 0.0;
    const bool both = (tp + fn) > 0 && (fp + tn) > 0;
    if (both) {
        // ranking is invariant to the monotone sigmoid, so scores can be used directly
        r.auc = auc_from_scores(scores, test.labels, positive);
    }
    r.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

// ---------------------------------------------------------- serialization --

nlohmann::json TrainedModel::to_json() const {
    return {{"schema_version", 1},
            {"activation", to_string(activation)},
            {"hidden_units", hidden_units},
            {"learning_rate", learning_rate},
            {"n_features", n_features},
            {"w1", w1},
            {"b1", b1},
            {"w2", w2},
            {"b2", b2},
            {"epochs_run", epochs_run},
            {"final_loss", final_loss},
            {"seed", seed},
            {"cv_accuracy", cv_accuracy}};
}

TrainedModel TrainedModel::from_json(const nlohmann::json& j) {
    TrainedModel m;
    m.activation = activation_from_string(j.at("activation").get<std::string>());
    m.hidden_units = j.at("hidden_units").get<int>();
    m.learning_rate = j.at("learning_rate").get<double>();
    m.n_features = j.at("n_features").get<std::size_t>();
    m.w1 = j.at("w1").get<std::vector<double>>();
    m.b1 = j.at("b1").get<std::vector<double>>();
    m.w2 = j.at("w2").get<std::vector<double>>();
    m.b2 = j.at("b2").get<double>();
    m.epochs_run = j.value("epochs_run", 0);
    m.final_loss = j.value("final_loss", 0.0);
    m.seed = j.value("seed", std::uint64_t{0});
    m.cv_accuracy = j.value("cv_accuracy", 0.0);
    return m;
}

void TrainedModel::save(const std::string& path) const {
    write_text_file(path, to_json().dump(2) + "\n");
}

TrainedModel TrainedModel::load(const std::string& path) {
    return from_json(nlohmann::json::parse(read_text_file(path)));
}

nlohmann::json MetricsReport::to_json() const {
    nlohmann::json j{{"accuracy", accuracy}, {"precision", precision}, {"recall", recall},
                     {"f1", f1},             {"n_cases", n_cases},
                     {"wall_time_seconds", wall_time_seconds}};
    if (auc)
        j["auc"] = *auc;
    else
        j["auc"] = nullptr;
    return j;
}

}  // namespace mlc::classifier
