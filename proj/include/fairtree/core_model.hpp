#pragma once
// Conditional multinomial model of two classifiers' paired calls within a
// binary sensitive attribute.
//
// Within each group a in {a1, a2} a record falls into one of three events:
// m1=0,m2=1 ("01"), m1=1,m2=0 ("10") or agreement ("dot"). The
// difference-in-differences of the rate of interest is
//
//     delta = p01(a2) - p01(a1) - p10(a2) + p10(a1)
//
// and the per-record score is taken in the coordinates
// (eta_plus, eta_minus, delta_small, delta_big).

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fairtree {

enum class Group : std::uint8_t { A1 = 0, A2 = 1 };

enum class Metric : std::uint8_t { FPR, FNR, Accept };

std::string_view to_string(Metric m);
/// Accepts "fpr", "fnr", "accept" (case-insensitive). Throws std::invalid_argument.
Metric parse_metric(std::string_view s);

/// One record of the audited population before metric conditioning.
struct LabeledRecord {
    std::uint8_t outcome = 0;  // ignored for Metric::Accept
    std::uint8_t yhat1 = 0;
    std::uint8_t yhat2 = 0;
    Group group = Group::A1;
};

/// A record after conditioning. For FNR the calls are already flipped so that
/// the downstream math is the FPR math.
struct PairedCall {
    std::uint8_t yhat1 = 0;
    std::uint8_t yhat2 = 0;
    Group group = Group::A1;
};

/// Index of the three-event cell a record falls in, per group.
enum class Cell : std::uint8_t { D01 = 0, D10 = 1, Agree = 2 };

inline Cell cell_of(const PairedCall& r) {
    if (r.yhat1 == r.yhat2) return Cell::Agree;
    return r.yhat1 == 0 ? Cell::D01 : Cell::D10;
}

/// Record type index in [0, 6): group * 3 + cell.
inline std::size_t record_type(const PairedCall& r) {
    return static_cast<std::size_t>(r.group) * 3 + static_cast<std::size_t>(cell_of(r));
}

/// Records retained after metric conditioning, with the positions they came
/// from in the caller's input.
struct ConditionedSample {
    std::vector<PairedCall> records;
    std::vector<std::size_t> source_index;

    std::size_t size() const { return records.size(); }
    bool empty() const { return records.empty(); }
};

/// True when `outcome` passes the metric's conditioning predicate.
bool passes_condition(Metric metric, std::uint8_t outcome);

ConditionedSample condition_sample(std::span<const LabeledRecord> records, Metric metric);

/// Conditions only the records at `rows`; source_index holds values from `rows`.
ConditionedSample condition_sample(std::span<const LabeledRecord> records,
                                   std::span<const std::size_t> rows, Metric metric);

struct GroupCounts {
    std::int64_t n01 = 0;
    std::int64_t n10 = 0;
    std::int64_t ndot = 0;

    std::int64_t total() const { return n01 + n10 + ndot; }
    std::int64_t disagreements() const { return n01 + n10; }
    GroupCounts& operator+=(const GroupCounts& o) {
        n01 += o.n01;
        n10 += o.n10;
        ndot += o.ndot;
        return *this;
    }
};

struct CellCounts {
    GroupCounts a1;
    GroupCounts a2;

    const GroupCounts& operator[](Group g) const { return g == Group::A1 ? a1 : a2; }
    GroupCounts& operator[](Group g) { return g == Group::A1 ? a1 : a2; }
    std::int64_t total() const { return a1.total() + a2.total(); }
    std::int64_t disagreements() const { return a1.disagreements() + a2.disagreements(); }
    CellCounts& operator+=(const CellCounts& o) {
        a1 += o.a1;
        a2 += o.a2;
        return *this;
    }
    void add(const PairedCall& r);
};

CellCounts count_cells(std::span<const PairedCall> records);
inline CellCounts count_cells(const ConditionedSample& s) { return count_cells(s.records); }

/// Thrown when a quantity cannot be estimated on a node (empty group, zero
/// probability hit by a record). Tree growth treats the node as terminal.
class DegenerateNode : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidParameter : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct GroupProbs {
    double p01 = 0.0;
    double p10 = 0.0;
    double pdot() const { return 1.0 - p01 - p10; }
};

struct ThetaHat {
    GroupProbs a1;
    GroupProbs a2;

    const GroupProbs& operator[](Group g) const { return g == Group::A1 ? a1 : a2; }
    GroupProbs& operator[](Group g) { return g == Group::A1 ? a1 : a2; }
    bool feasible(double tol = 1e-12) const;
};

struct ReparamTheta {
    double eta_plus = 0.0;
    double eta_minus = 0.0;
    double delta_small = 0.0;
    double delta_big = 0.0;
};

/// Gradient of a single record's log-likelihood, ordered
/// (d/d eta_plus, d/d eta_minus, d/d delta_small, d/d delta_big).
using ScoreVector = std::array<double, 4>;
inline constexpr std::size_t kDeltaCoordinate = 3;

/// Null MLE: per-group empirical frequencies. Throws DegenerateNode if a group is empty.
ThetaHat mle(const CellCounts& counts);

/// Plug-in difference-in-differences.
double delta_hat(const ThetaHat& theta);

ReparamTheta reparameterize(const ThetaHat& theta);
/// Throws InvalidParameter when a resulting probability leaves [-1e-12, 1+1e-12].
ThetaHat inverse_reparameterize(const ReparamTheta& r);

/// Multinomial log-likelihood with 0*log(0) = 0. Returns -infinity when a cell
/// with positive count has zero (or negative) probability.
double log_likelihood(const CellCounts& counts, const ThetaHat& theta);

/// Deviance at the counts' own MLE: -2 * l(mle(counts)).
double deviance(const CellCounts& counts);

/// Score of one record. Throws DegenerateNode if the record's cell has zero probability.
ScoreVector score_contribution(const PairedCall& record, const ThetaHat& theta);

/// Scores of the six record types (index = record_type()). Entries for
/// unreachable types (zero probability) are left as zero vectors and
/// `reachable` reports which were computed.
struct TypeScores {
    std::array<ScoreVector, 6> score{};
    std::array<bool, 6> reachable{};
};
TypeScores type_scores(const ThetaHat& theta);

/// Per-model, per-group rates of the conditioned bit (FPR, FNR or acceptance).
struct GroupRates {
    double m1_a1 = 0.0;
    double m1_a2 = 0.0;
    double m2_a1 = 0.0;
    double m2_a2 = 0.0;

    double disparity_m1() const { return m1_a2 - m1_a1; }
    double disparity_m2() const { return m2_a2 - m2_a1; }
    double delta() const { return disparity_m2() - disparity_m1(); }
};

/// Rates computed by direct row counting. Groups with no records give NaN.
GroupRates group_rates(std::span<const PairedCall> records);

}  // namespace fairtree
