#include "mlc/cat.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

namespace mlc::cat {

const char* to_string(StopReason r) {
    switch (r) {
        case StopReason::se_threshold: return "se_threshold";
        case StopReason::pool_exhausted_refusal: return "pool_exhausted_refusal";
        case StopReason::max_iterations: return "max_iterations";
    }
    return "?";
}

CatConfig CatConfig::from_json(const nlohmann::json& j) {
    CatConfig c;
    if (j.contains("reliability")) c.reliability = j["reliability"].get<double>();
    if (j.contains("sigma")) c.sigma = j["sigma"].get<double>();
    if (j.contains("jitter_sd")) c.jitter_sd = j["jitter_sd"].get<double>();
    if (j.contains("min_cases_for_mlc")) c.min_cases_for_mlc = j["min_cases_for_mlc"].get<int>();
    if (j.contains("stop_window")) c.stop_window = j["stop_window"].get<int>();
    if (j.contains("max_steps")) c.max_steps = j["max_steps"].get<int>();
    if (j.contains("step_l_offset")) c.step_l_offset = j["step_l_offset"].get<int>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (c.reliability <= 0.0 || c.reliability >= 1.0)
        throw MlcError("reliability must be in (0,1)");
    return c;
}

CatSession initialize(std::vector<PoolCase> pool, const CatConfig& config) {
    if (pool.empty()) throw MlcError("CAT pool is empty");
    CatSession s;
    s.pool = std::move(pool);
    s.used.assign(s.pool.size(), 0);
    s.rng.seed(config.seed);

    std::vector<double> cdis;
    cdis.reserve(s.pool.size());
    for (const auto& c : s.pool) cdis.push_back(c.oriented_cdi);
    s.target_cdi = percentile(cdis, 0.25);
    return s;
}

std::size_t select_next(const CatSession& session) {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < session.pool.size(); ++i) {
        if (session.used[i]) continue;
        if (!best) {
            best = i;
            continue;
        }
        const double di = std::fabs(session.pool[i].oriented_cdi - session.target_cdi);
        const double db = std::fabs(session.pool[*best].oriented_cdi - session.target_cdi);
        if (di < db || (di == db && session.pool[i].case_id < session.pool[*best].case_id))
            best = i;
    }
    if (!best) throw MlcError("CAT pool exhausted");
    return *best;
}

double update_target(CatSession& session, bool correct, const CatConfig& config) {
    if (session.L < 1) throw MlcError("update_target before any administration");
    const double step = 2.0 / std::pow(2.0, session.L + config.step_l_offset);
    double g = 0.0;
    if (config.jitter_sd > 0.0) {
        std::normal_distribution<double> jitter(0.0, config.jitter_sd);
        g = jitter(session.rng);
    }
    session.target_cdi += (correct ? step : -step) + g;
    session.target_history.push_back(session.target_cdi);
    return session.target_cdi;
}

bool should_stop(const CatSession& session, const CatConfig& config) {
    if (session.L >= config.max_steps) return true;
    if (session.L < config.min_cases_for_mlc) return false;
    const auto w = static_cast<std::size_t>(config.stop_window);
    if (session.target_history.size() < w) return false;
    const std::span<const double> tail(session.target_history.data() +
                                           session.target_history.size() - w,
                                       w);
    return sample_sd(tail) < config.se_m();
}

double compute_mlc(int L, double H, int R, int W, int min_cases) {
    if (L < min_cases)
        throw MlcError("MLC requires at least " + std::to_string(min_cases) + " cases");
    const double base = H / static_cast<double>(L);
    if (R > 0 && W > 0) return base + std::log(static_cast<double>(R) / W);
    if (R == 0) return base + std::log((R + 0.5) / (W - 0.5));
    return base + std::log((R - 0.5) / (W + 0.5));  // W == 0
}

double compute_mlc(const CatSession& session, const CatConfig& config) {
    return compute_mlc(session.L, session.H, session.R, session.W,
                       config.min_cases_for_mlc);
}

MlcReport run_cat(const CasePredictor& predict, std::vector<PoolCase> pool,
                  ClassLabel class_under_test, const CatConfig& config,
                  std::size_t total_dataset_size) {
    const auto t0 = std::chrono::steady_clock::now();
    CatSession session = initialize(std::move(pool), config);
    session.class_under_test = class_under_test;

    MlcReport report;
    report.class_under_test = class_under_test;
    report.stop_reason = StopReason::se_threshold;

    while (true) {
        std::size_t idx;
        try {
            idx = select_next(session);
        } catch (const MlcError&) {
            report.stop_reason = StopReason::pool_exhausted_refusal;
            break;
        }
        session.used[idx] = 1;
        const auto& pc = session.pool[idx];

        const bool correct = predict(pc.case_id) == class_under_test;
        session.L += 1;
        session.H += pc.oriented_cdi;
        (correct ? session.R : session.W) += 1;

        Administration adm;
        adm.case_id = pc.case_id;
        adm.oriented_cdi = pc.oriented_cdi;
        adm.correct = correct;
        adm.target_after = update_target(session, correct, config);
        if (session.L >= config.min_cases_for_mlc)
            adm.running_mlc = compute_mlc(session, config);
        session.administered.push_back(adm);
        report.trajectory.push_back(adm);

        if (should_stop(session, config)) {
            if (session.L >= config.max_steps)
                report.stop_reason = StopReason::max_iterations;
            break;
        }
    }

    if (session.L < config.min_cases_for_mlc)
        throw MlcError("CAT terminated with fewer than the minimum cases");
    report.mlc = compute_mlc(session, config);
    report.cases_used = session.L;
    report.fraction_of_dataset =
        total_dataset_size ? static_cast<double>(session.L) / total_dataset_size : 0.0;
    report.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

MlcReport run_cat(const classifier::TrainedModel& model, const FeatureLookup& features,
                  std::vector<PoolCase> pool, ClassLabel class_under_test,
                  const CatConfig& config, std::size_t total_dataset_size) {
    CasePredictor predictor = [&](const std::string& case_id) {
        return classifier::predict(model, features(case_id)).label;
    };
    return run_cat(predictor, std::move(pool), class_under_test, config,
                   total_dataset_size);
}

nlohmann::json MlcReport::to_json() const {
    nlohmann::json traj = nlohmann::json::array();
    int step = 0;
    for (const auto& a : trajectory) {
        nlohmann::json row{{"step", ++step},
                           {"case_id", a.case_id},
                           {"cdi", a.oriented_cdi},
                           {"correct", a.correct},
                           {"target", a.target_after}};
        row["running_mlc"] =
            std::isnan(a.running_mlc) ? nlohmann::json() : nlohmann::json(a.running_mlc);
        traj.push_back(std::move(row));
    }
    return {{"schema_version", 1},
            {"class_under_test", mlc::to_string(class_under_test)},
            {"mlc", mlc},
            {"cases_used", cases_used},
            {"fraction_of_dataset", fraction_of_dataset},
            {"wall_time_seconds", wall_time_seconds},
            {"stop_reason", to_string(stop_reason)},
            {"trajectory", std::move(traj)}};
}

std::string MlcReport::trajectory_csv() const {
    std::ostringstream out;
    out.precision(17);
    out << "step,case_id,cdi,correct,target,running_mlc\n";
    int step = 0;
    for (const auto& a : trajectory) {
        out << ++step << ',' << a.case_id << ',' << a.oriented_cdi << ','
            << (a.correct ? 1 : 0) << ',' << a.target_after << ',';
        if (!std::isnan(a.running_mlc)) out << a.running_mlc;
        out << '\n';
    }
    return out.str();
}

}  // namespace mlc::cat
