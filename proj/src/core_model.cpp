#include "fairtree/core_model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

namespace fairtree {

std::string_view to_string(Metric m) {
    switch (m) {
        case Metric::FPR: return "fpr";
        case Metric::FNR: return "fnr";
        case Metric::Accept: return "accept";
    }
    return "?";
}

Metric parse_metric(std::string_view s) {
    std::string lower(s);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "fpr") return Metric::FPR;
    if (lower == "fnr") return Metric::FNR;
    if (lower == "accept" || lower == "acceptance") return Metric::Accept;
    throw std::invalid_argument("unknown metric '" + std::string(s) + "' (expected fpr, fnr or accept)");
}

bool passes_condition(Metric metric, std::uint8_t outcome) {
    switch (metric) {
        case Metric::FPR: return outcome == 0;
        case Metric::FNR: return outcome == 1;
        case Metric::Accept: return true;
    }
    return false;
}

namespace {

PairedCall conditioned_call(const LabeledRecord& r, Metric metric) {
    if (metric == Metric::FNR) {
        return {static_cast<std::uint8_t>(1 - r.yhat1), static_cast<std::uint8_t>(1 - r.yhat2), r.group};
    }
    return {r.yhat1, r.yhat2, r.group};
}

}  // namespace

ConditionedSample condition_sample(std::span<const LabeledRecord> records, Metric metric) {
    ConditionedSample out;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (!passes_condition(metric, records[i].outcome)) continue;
        out.records.push_back(conditioned_call(records[i], metric));
        out.source_index.push_back(i);
    }
    return out;
}

ConditionedSample condition_sample(std::span<const LabeledRecord> records,
                                   std::span<const std::size_t> rows, Metric metric) {
    ConditionedSample out;
    out.records.reserve(rows.size());
    out.source_index.reserve(rows.size());
    for (std::size_t row : rows) {
        const auto& r = records[row];
        if (!passes_condition(metric, r.outcome)) continue;
        out.records.push_back(conditioned_call(r, metric));
        out.source_index.push_back(row);
    }
    return out;
}

void CellCounts::add(const PairedCall& r) {
    auto& g = (*this)[r.group];
    switch (cell_of(r)) {
        case Cell::D01: ++g.n01; break;
        case Cell::D10: ++g.n10; break;
        case Cell::Agree: ++g.ndot; break;
    }
}

CellCounts count_cells(std::span<const PairedCall> records) {
    CellCounts c;
    for (const auto& r : records) c.add(r);
    return c;
}

bool ThetaHat::feasible(double tol) const {
    for (const auto* g : {&a1, &a2}) {
        if (g->p01 < -tol || g->p10 < -tol || g->p01 > 1 + tol || g->p10 > 1 + tol) return false;
        if (g->pdot() < -tol) return false;
    }
    return true;
}

ThetaHat mle(const CellCounts& counts) {
    ThetaHat t;
    for (Group g : {Group::A1, Group::A2}) {
        const auto& c = counts[g];
        const auto n = c.total();
        if (n <= 0) {
            throw DegenerateNode(g == Group::A1 ? "group a1 has no conditioned observations"
                                                : "group a2 has no conditioned observations");
        }
        t[g].p01 = static_cast<double>(c.n01) / static_cast<double>(n);
        t[g].p10 = static_cast<double>(c.n10) / static_cast<double>(n);
    }
    return t;
}

double delta_hat(const ThetaHat& t) {
    return (t.a2.p01 - t.a2.p10) - (t.a1.p01 - t.a1.p10);
}

ReparamTheta reparameterize(const ThetaHat& t) {
    ReparamTheta r;
    r.eta_plus = t.a1.p01 + t.a1.p10;
    r.eta_minus = t.a1.p01 - t.a1.p10;
    r.delta_small = t.a2.p01 + t.a2.p10 - r.eta_plus;
    r.delta_big = t.a2.p01 - t.a2.p10 - r.eta_minus;
    return r;
}

ThetaHat inverse_reparameterize(const ReparamTheta& r) {
    ThetaHat t;
    t.a1.p01 = (r.eta_plus + r.eta_minus) / 2;
    t.a1.p10 = (r.eta_plus - r.eta_minus) / 2;
    t.a2.p01 = (r.eta_plus + r.delta_small + r.eta_minus + r.delta_big) / 2;
    t.a2.p10 = (r.eta_plus + r.delta_small - r.eta_minus - r.delta_big) / 2;
    constexpr double tol = 1e-12;
    for (double p : {t.a1.p01, t.a1.p10, t.a2.p01, t.a2.p10, t.a1.pdot(), t.a2.pdot()}) {
        if (!(p >= -tol && p <= 1 + tol)) {
            throw InvalidParameter("reparameterized point maps outside the probability simplex");
        }
    }
    return t;
}

namespace {

// n * log(p) with 0 * log(anything) = 0.
double weighted_log(std::int64_t n, double p) {
    if (n == 0) return 0.0;
    if (!(p > 0.0)) return -std::numeric_limits<double>::infinity();
    return static_cast<double>(n) * std::log(p);
}

}  // namespace

double log_likelihood(const CellCounts& counts, const ThetaHat& theta) {
    double ll = 0.0;
    for (Group g : {Group::A1, Group::A2}) {
        const auto& c = counts[g];
        const auto& p = theta[g];
        ll += weighted_log(c.n01, p.p01);
        ll += weighted_log(c.n10, p.p10);
        ll += weighted_log(c.ndot, p.pdot());
    }
    return ll;
}

double deviance(const CellCounts& counts) {
    // Per-group frequencies; an empty group contributes nothing.
    double ll = 0.0;
    for (Group g : {Group::A1, Group::A2}) {
        const auto& c = counts[g];
        const auto n = static_cast<double>(c.total());
        if (n == 0) continue;
        for (auto k : {c.n01, c.n10, c.ndot}) {
            if (k > 0) ll += static_cast<double>(k) * std::log(static_cast<double>(k) / n);
        }
    }
    return -2.0 * ll;
}

TypeScores type_scores(const ThetaHat& theta) {
    TypeScores ts;
    const auto put = [&](Group g, Cell c, double p, auto&& make) {
        const std::size_t idx = static_cast<std::size_t>(g) * 3 + static_cast<std::size_t>(c);
        if (p > 0.0) {
            ts.score[idx] = make(p);
            ts.reachable[idx] = true;
        }
    };
    // Group a1 only moves eta_plus / eta_minus.
    put(Group::A1, Cell::D01, theta.a1.p01, [](double p) { return ScoreVector{0.5 / p, 0.5 / p, 0.0, 0.0}; });
    put(Group::A1, Cell::D10, theta.a1.p10, [](double p) { return ScoreVector{0.5 / p, -0.5 / p, 0.0, 0.0}; });
    put(Group::A1, Cell::Agree, theta.a1.pdot(), [](double p) { return ScoreVector{-1.0 / p, 0.0, 0.0, 0.0}; });
    put(Group::A2, Cell::D01, theta.a2.p01, [](double p) { return ScoreVector{0.5 / p, 0.5 / p, 0.5 / p, 0.5 / p}; });
    put(Group::A2, Cell::D10, theta.a2.p10, [](double p) { return ScoreVector{0.5 / p, -0.5 / p, 0.5 / p, -0.5 / p}; });
    put(Group::A2, Cell::Agree, theta.a2.pdot(), [](double p) { return ScoreVector{-1.0 / p, 0.0, -1.0 / p, 0.0}; });
    return ts;
}

ScoreVector score_contribution(const PairedCall& record, const ThetaHat& theta) {
    const auto ts = type_scores(theta);
    const auto idx = record_type(record);
    if (!ts.reachable[idx]) {
        throw DegenerateNode("record falls in a cell with zero probability");
    }
    return ts.score[idx];
}

GroupRates group_rates(std::span<const PairedCall> records) {
    std::array<std::int64_t, 2> n{}, pos1{}, pos2{};
    for (const auto& r : records) {
        const auto g = static_cast<std::size_t>(r.group);
        ++n[g];
        pos1[g] += r.yhat1;
        pos2[g] += r.yhat2;
    }
    const auto rate = [](std::int64_t k, std::int64_t total) {
        return total == 0 ? std::numeric_limits<double>::quiet_NaN()
                          : static_cast<double>(k) / static_cast<double>(total);
    };
    return {rate(pos1[0], n[0]), rate(pos1[1], n[1]), rate(pos2[0], n[0]), rate(pos2[1], n[1])};
}

}  // namespace fairtree
