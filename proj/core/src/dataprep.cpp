#include "mlc/dataprep.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

namespace mlc::dataprep {

std::vector<double> RawTable::column(std::size_t i) const {
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r.at(i));
    return out;
}

// ------------------------------------------------------------- ingest_csv --

RawTable ingest_csv(const std::string& path, const TableSchema& schema) {
    std::ifstream in(path);
    if (!in) throw MlcError("cannot open data file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw MlcError("empty data file: " + path);
    const auto header = split_csv_line(line);

    auto column_index = [&](const std::string& name) -> std::size_t {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw MlcError("missing column: " + name);
        return static_cast<std::size_t>(it - header.begin());
    };

    std::vector<std::size_t> feature_cols;
    for (const auto& f : schema.features) feature_cols.push_back(column_index(f));
    const std::size_t label_col = column_index(schema.label_column);
    std::optional<std::size_t> id_col;
    if (schema.id_column) id_col = column_index(*schema.id_column);

    RawTable table;
    table.feature_names = schema.features;
    std::size_t row_no = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != header.size())
            throw MlcError("row " + std::to_string(row_no + 1) + ": expected " +
                           std::to_string(header.size()) + " fields, got " +
                           std::to_string(fields.size()));
        auto parse = [&](std::size_t col) {
            const std::string& cell = fields[col];
            try {
                std::size_t pos = 0;
                const double v = std::stod(cell, &pos);
                if (pos != cell.size()) throw std::invalid_argument(cell);
                return v;
            } catch (const std::exception&) {
                throw MlcError("unparseable cell at row " + std::to_string(row_no + 1) +
                               ", column " + header[col] + ": '" + cell + "'");
            }
        };
        std::vector<double> row;
        row.reserve(feature_cols.size());
        for (std::size_t c : feature_cols) row.push_back(parse(c));
        table.rows.push_back(std::move(row));
        const double label = parse(label_col);
        table.labels.push_back(label == schema.class1_value ? ClassLabel::class1
                                                            : ClassLabel::class2);
        table.case_ids.push_back(id_col ? fields[*id_col] : "row_" + std::to_string(row_no));
        ++row_no;
    }
    if (table.rows.empty()) throw MlcError("data file has no rows: " + path);
    return table;
}

// ----------------------------------------------------------- apply_coding --

namespace {

int code_value(double raw, const FeatureRule& fr, const std::vector<double>& cutpoints,
               const std::string& feature) {
    const double v = fr.negate ? -raw : raw;
    if (std::holds_alternative<RangeRule>(fr.rule)) {
        const auto& r = std::get<RangeRule>(fr.rule);
        return (v >= r.normal_low && v <= r.normal_high) ? 0 : 1;
    }
    if (std::holds_alternative<CategoryRule>(fr.rule)) {
        const auto& r = std::get<CategoryRule>(fr.rule);
        const auto it = r.mapping.find(v);
        if (it == r.mapping.end())
            throw MlcError("value " + std::to_string(v) +
                           " not covered by category rule for feature " + feature);
        return it->second;
    }
    if (std::holds_alternative<ThresholdRule>(fr.rule)) {
        const auto& r = std::get<ThresholdRule>(fr.rule);
        return (r.above_is_one ? v > r.cut : v <= r.cut) ? 1 : 0;
    }
    // quartile: values equal to a cutpoint belong to the lower category
    int code = 0;
    for (double c : cutpoints) {
        if (v <= c) return code;
        ++code;
    }
    return code;
}

}  // namespace

std::pair<irt::ResponseMatrix, CodingReport>
apply_coding(const RawTable& table, const CodingSpec& spec) {
    for (const auto& name : table.feature_names)
        if (!spec.rules.count(name))
            throw MlcError("coding spec has no rule for feature " + name);

    CodingReport report;
    std::map<std::string, std::vector<double>> cutpoints;
    int max_code = 1;
    for (std::size_t i = 0; i < table.feature_names.size(); ++i) {
        const auto& name = table.feature_names[i];
        const auto& fr = spec.rules.at(name);
        if (const auto* q = std::get_if<QuartileRule>(&fr.rule)) {
            std::vector<double> cuts = q->cutpoints;
            if (q->auto_compute || cuts.empty()) {
                auto col = table.column(i);
                if (fr.negate)
                    for (double& v : col) v = -v;
                cuts = {percentile(col, 0.25), percentile(col, 0.50), percentile(col, 0.75)};
            }
            for (std::size_t k = 1; k < cuts.size(); ++k)
                if (!(cuts[k] > cuts[k - 1]))
                    throw MlcError("quartile cutpoints not strictly increasing for " + name);
            max_code = std::max(max_code, static_cast<int>(cuts.size()));
            report.resolved_cutpoints[name] = cuts;
            cutpoints[name] = std::move(cuts);
        } else if (const auto* c = std::get_if<CategoryRule>(&fr.rule)) {
            for (const auto& [_, code] : c->mapping) max_code = std::max(max_code, code);
        }
    }
    report.n_categories = max_code + 1;

    irt::ResponseMatrix rm;
    rm.case_ids = table.case_ids;
    rm.class_labels = table.labels;
    rm.codes.reserve(table.n_rows());
    for (const auto& row : table.rows) {
        std::vector<int> codes;
        codes.reserve(row.size());
        for (std::size_t i = 0; i < row.size(); ++i) {
            const auto& name = table.feature_names[i];
            const auto it = cutpoints.find(name);
            codes.push_back(code_value(row[i], spec.rules.at(name),
                                       it == cutpoints.end() ? std::vector<double>{}
                                                             : it->second,
                                       name));
        }
        rm.codes.push_back(std::move(codes));
    }
    return {std::move(rm), std::move(report)};
}

// -------------------------------------------------------- balance_classes --

RawTable balance_classes(const RawTable& table, std::uint64_t seed) {
    std::vector<std::size_t> c1, c2;
    for (std::size_t i = 0; i < table.n_rows(); ++i)
        (table.labels[i] == ClassLabel::class1 ? c1 : c2).push_back(i);
    if (c1.empty() || c2.empty()) throw MlcError("balance_classes: one class is empty");

    auto& majority = c1.size() > c2.size() ? c1 : c2;
    const std::size_t target = std::min(c1.size(), c2.size());
    if (majority.size() > target) {
        Rng rng(seed);
        std::shuffle(majority.begin(), majority.end(), rng);
        majority.resize(target);
    }

    std::vector<std::size_t> keep;
    keep.reserve(c1.size() + c2.size());
    keep.insert(keep.end(), c1.begin(), c1.end());
    keep.insert(keep.end(), c2.begin(), c2.end());
    std::sort(keep.begin(), keep.end());  // preserve original row order

    RawTable out;
    out.feature_names = table.feature_names;
    for (std::size_t i : keep) {
        out.case_ids.push_back(table.case_ids[i]);
        out.rows.push_back(table.rows[i]);
        out.labels.push_back(table.labels[i]);
    }
    return out;
}

// ------------------------------------------------------- stratified_split --

SplitAssignment stratified_split(const std::vector<cdi::CdiRecord>& records,
                                 std::uint64_t seed) {
    if (records.empty()) throw MlcError("stratified_split: no records");
    const auto bins = cdi::bin_cdis(records);

    SplitAssignment out;
    Rng rng(seed);
    for (const auto& bin : bins) {
        std::vector<std::string> ids = bin.member_ids;
        std::shuffle(ids.begin(), ids.end(), rng);
        const std::size_t n = ids.size();
        std::size_t n_train;
        if (n == 1)
            n_train = 1;  // singletons go to training
        else if (n == 2)
            n_train = 1;  // split in half
        else
            n_train = static_cast<std::size_t>(std::floor(0.7 * n + 0.5));  // round half up
        for (std::size_t i = 0; i < n; ++i)
            out.roles[ids[i]] = i < n_train ? SplitRole::train : SplitRole::test;
        out.bins.push_back({bin.lower_edge, n_train, n - n_train});
    }
    return out;
}

std::string SplitAssignment::to_csv() const {
    // bin column is recomputed by consumers from cdi.csv; emitted here as role map
    std::ostringstream out;
    out << "case_id,role\n";
    for (const auto& [id, role] : roles)
        out << id << ',' << (role == SplitRole::train ? "train" : "test") << '\n';
    return out.str();
}

// ---------------------------------------------------------- spec (de)json --

nlohmann::json CodingSpec::to_json() const {
    nlohmann::json j;
    j["schema_version"] = 1;
    auto& rules_j = j["rules"] = nlohmann::json::object();
    for (const auto& [name, fr] : rules) {
        nlohmann::json r;
        if (const auto* x = std::get_if<RangeRule>(&fr.rule)) {
            r["type"] = "range";
            r["normal_low"] = x->normal_low;
            r["normal_high"] = x->normal_high;
        } else if (const auto* x = std::get_if<CategoryRule>(&fr.rule)) {
            r["type"] = "category";
            auto& m = r["mapping"] = nlohmann::json::object();
            for (const auto& [v, code] : x->mapping) {
                std::ostringstream key;
                key << v;
                m[key.str()] = code;
            }
        } else if (const auto* x = std::get_if<ThresholdRule>(&fr.rule)) {
            r["type"] = "threshold";
            r["cut"] = x->cut;
            r["above_is_one"] = x->above_is_one;
        } else if (const auto* x = std::get_if<QuartileRule>(&fr.rule)) {
            r["type"] = "quartile";
            if (x->auto_compute)
                r["cutpoints"] = "auto";
            else
                r["cutpoints"] = x->cutpoints;
        }
        if (fr.negate) r["negate"] = true;
        rules_j[name] = std::move(r);
    }
    return j;
}

CodingSpec CodingSpec::from_json(const nlohmann::json& j) {
    CodingSpec spec;
    for (const auto& [name, r] : j.at("rules").items()) {
        FeatureRule fr;
        fr.negate = r.value("negate", false);
        const std::string type = r.at("type").get<std::string>();
        if (type == "range") {
            fr.rule = RangeRule{r.at("normal_low").get<double>(),
                                r.at("normal_high").get<double>()};
        } else if (type == "category") {
            CategoryRule cr;
            for (const auto& [k, v] : r.at("mapping").items())
                cr.mapping[std::stod(k)] = v.get<int>();
            fr.rule = std::move(cr);
        } else if (type == "threshold") {
            fr.rule = ThresholdRule{r.at("cut").get<double>(), r.value("above_is_one", true)};
        } else if (type == "quartile") {
            QuartileRule qr;
            if (r.at("cutpoints").is_string() && r["cutpoints"] == "auto")
                qr.auto_compute = true;
            else
                qr.cutpoints = r.at("cutpoints").get<std::vector<double>>();
            fr.rule = std::move(qr);
        } else {
            throw MlcError("unknown coding rule type: " + type);
        }
        spec.rules[name] = std::move(fr);
    }
    if (spec.rules.empty()) throw MlcError("coding spec has no rules");
    return spec;
}

CodingSpec CodingSpec::load(const std::string& path) {
    return from_json(nlohmann::json::parse(read_text_file(path)));
}

}  // namespace mlc::dataprep
