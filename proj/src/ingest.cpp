#include "fairtree/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <unordered_map>

#include <fmt/format.h>

namespace fairtree {

std::vector<std::string> split_record(const std::string& line, char delimiter) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(ch);
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == delimiter) {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::optional<double> to_double(const std::string& s) {
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (first != last && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || s.empty()) return std::nullopt;
    return v;
}

// Outcome label comparison: exact text, or equal as numbers ("1" == "1.0").
bool same_label(const std::string& value, const std::string& positive) {
    if (value == positive) return true;
    const auto a = to_double(value);
    const auto b = to_double(positive);
    return a && b && *a == *b;
}

struct ColumnRef {
    std::string name;
    std::size_t index = 0;
};

class Reader {
public:
    Reader(const AuditConfig& config, std::string source) : cfg_(config), source_(std::move(source)) {}

    IngestResult run(std::istream& in) {
        std::string line;
        if (!std::getline(in, line)) throw IngestError(fmt::format("{}: empty file", source_));
        strip_bom(line);
        header(split_record(line, cfg_.delimiter));

        IngestResult result;
        std::size_t line_no = 1;
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            ++result.input_rows;
            auto fields = split_record(line, cfg_.delimiter);
            for (auto& f : fields) f = trim(f);
            if (fields.size() != width_) {
                result.rejected.push_back({line_no, fmt::format("expected {} fields, found {}", width_, fields.size())});
                continue;
            }
            if (auto reason = row(fields, line_no)) result.rejected.push_back({line_no, *reason});
        }
        if (result.input_rows == 0) throw IngestError(fmt::format("{}: no data rows", source_));
        finish(result.table);
        return result;
    }

private:
    static void strip_bom(std::string& s) {
        if (s.size() >= 3 && static_cast<unsigned char>(s[0]) == 0xEF && static_cast<unsigned char>(s[1]) == 0xBB &&
            static_cast<unsigned char>(s[2]) == 0xBF) {
            s.erase(0, 3);
        }
    }

    bool missing(const std::string& v) const {
        return std::find(cfg_.missing_tokens.begin(), cfg_.missing_tokens.end(), v) != cfg_.missing_tokens.end();
    }

    ColumnRef find(const std::string& name) const {
        const auto it = index_.find(name);
        if (it == index_.end()) throw IngestError(fmt::format("{}: missing column '{}'", source_, name));
        return {name, it->second};
    }

    void header(std::vector<std::string> names) {
        width_ = names.size();
        for (std::size_t i = 0; i < names.size(); ++i) {
            // Duplicate headers: the first occurrence wins.
            index_.emplace(trim(names[i]), i);
        }
        if (cfg_.outcome) outcome_ = find(cfg_.outcome->column);
        model_[0] = find(cfg_.model_a.column);
        model_[1] = find(cfg_.model_b.column);
        group_ = find(cfg_.sensitive.column);
        for (const auto& v : cfg_.split_vars) covariates_.push_back(find(v.name));
    }

    std::string where(std::size_t line_no, const ColumnRef& col) const {
        return fmt::format("{}: line {}, column '{}'", source_, line_no, col.name);
    }

    std::optional<std::string> row(const std::vector<std::string>& f, std::size_t line_no) {
        if (outcome_ && missing(f[outcome_->index])) return "missing outcome '" + outcome_->name + "'";
        for (const auto& m : model_)
            if (missing(f[m.index])) return "missing prediction '" + m.name + "'";
        if (missing(f[group_.index])) return "missing group '" + group_.name + "'";

        std::array<double, 2> score{};
        std::array<std::uint8_t, 2> call{};
        const std::array<const ModelSpec*, 2> specs{&cfg_.model_a, &cfg_.model_b};
        for (std::size_t m = 0; m < 2; ++m) {
            const auto& text = f[model_[m].index];
            const auto v = to_double(text);
            if (!v) throw IngestError(fmt::format("{}: unparseable numeric '{}'", where(line_no, model_[m]), text));
            score[m] = *v;
            if (specs[m]->cutoff) {
                const double c = *specs[m]->cutoff;
                call[m] = specs[m]->rule == CutoffRule::Greater ? (*v > c) : (*v >= c);
            } else if (*v == 0.0 || *v == 1.0) {
                call[m] = static_cast<std::uint8_t>(*v);
            } else {
                throw IngestError(fmt::format("{}: prediction '{}' is not binary and no cutoff was given",
                                              where(line_no, model_[m]), text));
            }
        }

        std::vector<std::string> cov_text;
        cov_text.reserve(covariates_.size());
        for (std::size_t j = 0; j < covariates_.size(); ++j) {
            const auto& text = f[covariates_[j].index];
            if (cfg_.split_vars[j].kind == CovariateKind::Numeric && !missing(text) && !to_double(text)) {
                throw IngestError(fmt::format("{}: unparseable numeric '{}'", where(line_no, covariates_[j]), text));
            }
            cov_text.push_back(missing(text) ? std::string() : text);
            cov_missing_.push_back(missing(text));
        }

        if (outcome_) outcome_values_.push_back(same_label(f[outcome_->index], cfg_.outcome->positive) ? 1 : 0);
        for (std::size_t m = 0; m < 2; ++m) {
            calls_[m].push_back(call[m]);
            scores_[m].push_back(score[m]);
        }
        groups_.push_back(f[group_.index]);
        for (auto& t : cov_text) cov_values_.push_back(std::move(t));
        lines_.push_back(line_no);
        return std::nullopt;
    }

    void finish(ObservationTable& t) {
        const auto n = lines_.size();
        t.source = source_;
        t.source_row = lines_;
        t.outcome = outcome_values_;
        t.yhat1 = calls_[0];
        t.yhat2 = calls_[1];
        // Binary prediction columns carry no scores to rank.
        t.model1 = {cfg_.model_a.column, cfg_.model_a.cutoff, cfg_.model_a.rule,
                    cfg_.model_a.cutoff ? scores_[0] : std::vector<double>{}};
        t.model2 = {cfg_.model_b.column, cfg_.model_b.cutoff, cfg_.model_b.rule,
                    cfg_.model_b.cutoff ? scores_[1] : std::vector<double>{}};

        std::set<std::string> labels(groups_.begin(), groups_.end());
        t.group_levels.assign(labels.begin(), labels.end());
        std::map<std::string, int> group_code;
        for (std::size_t i = 0; i < t.group_levels.size(); ++i) group_code[t.group_levels[i]] = static_cast<int>(i);
        t.group.reserve(n);
        for (const auto& g : groups_) t.group.push_back(group_code.at(g));

        const auto k = covariates_.size();
        for (std::size_t j = 0; j < k; ++j) {
            const auto& spec = cfg_.split_vars[j];
            CovariateColumn col;
            col.name = spec.name;
            col.kind = spec.kind;
            const auto value = [&](std::size_t r) -> const std::string& { return cov_values_[r * k + j]; };
            const auto is_missing = [&](std::size_t r) { return cov_missing_[r * k + j]; };

            if (spec.kind == CovariateKind::Numeric) {
                col.values.reserve(n);
                for (std::size_t r = 0; r < n; ++r) {
                    col.values.push_back(is_missing(r) ? std::numeric_limits<double>::quiet_NaN() : *to_double(value(r)));
                }
            } else {
                std::set<std::string> seen;
                bool any_missing = false;
                for (std::size_t r = 0; r < n; ++r) {
                    if (is_missing(r)) any_missing = true;
                    else seen.insert(value(r));
                }
                col.levels = order_levels(spec, seen);
                if (spec.kind == CovariateKind::Categorical && any_missing) col.levels.emplace_back("NA");
                std::map<std::string, int> code;
                for (std::size_t i = 0; i < col.levels.size(); ++i) code[col.levels[i]] = static_cast<int>(i);
                col.codes.reserve(n);
                for (std::size_t r = 0; r < n; ++r) {
                    if (is_missing(r)) {
                        col.codes.push_back(spec.kind == CovariateKind::Categorical ? code.at("NA") : -1);
                    } else {
                        col.codes.push_back(code.at(value(r)));
                    }
                }
            }
            t.covariates.push_back(std::move(col));
        }
    }

    std::vector<std::string> order_levels(const SplitVarSpec& spec, const std::set<std::string>& seen) const {
        if (spec.kind == CovariateKind::Ordinal && !spec.levels.empty()) {
            for (const auto& s : seen) {
                if (std::find(spec.levels.begin(), spec.levels.end(), s) == spec.levels.end()) {
                    throw IngestError(fmt::format("{}: ordinal '{}' has undeclared level '{}'", source_, spec.name, s));
                }
            }
            return spec.levels;
        }
        std::vector<std::string> out(seen.begin(), seen.end());
        if (spec.kind == CovariateKind::Ordinal &&
            std::all_of(out.begin(), out.end(), [](const std::string& s) { return to_double(s).has_value(); })) {
            std::stable_sort(out.begin(), out.end(),
                             [](const std::string& a, const std::string& b) { return *to_double(a) < *to_double(b); });
        }
        return out;
    }

    const AuditConfig& cfg_;
    std::string source_;
    std::unordered_map<std::string, std::size_t> index_;
    std::size_t width_ = 0;
    std::optional<ColumnRef> outcome_;
    std::array<ColumnRef, 2> model_;
    ColumnRef group_;
    std::vector<ColumnRef> covariates_;

    std::vector<std::uint8_t> outcome_values_;
    std::array<std::vector<std::uint8_t>, 2> calls_;
    std::array<std::vector<double>, 2> scores_;
    std::vector<std::string> groups_;
    std::vector<std::string> cov_values_;
    std::vector<bool> cov_missing_;
    std::vector<std::size_t> lines_;
};

}  // namespace

IngestResult ingest(std::istream& in, const AuditConfig& config, const std::string& source) {
    return Reader(config, source).run(in);
}

IngestResult ingest(const std::string& path, const AuditConfig& config) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestError("cannot open data file '" + path + "'");
    return ingest(in, config, path);
}

}  // namespace fairtree
