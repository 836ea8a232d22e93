#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "becsim/channel.hpp"
#include "becsim/regions.hpp"

namespace becsim {

// Which transmission scheme a simulation drives. String forms (the CLI
// spellings) are listed at protocol_name.
enum class ProtocolId {
    NnSemiblind,
    NnBlindSymmetric,
    NnBlindInner,
    DnCaseB,
    DnCaseC,
    DdBlindSymmetric,
};

// "nn-semiblind", "nn-blind-symmetric", "nn-blind-inner", "case-b",
// "case-c", "dd-blind-symmetric".
std::string_view protocol_name(ProtocolId id);
std::optional<ProtocolId> protocol_from_name(std::string_view name);
const std::vector<ProtocolId>& all_protocols();

// The rate pair the scheme is built to converge to at these parameters:
// the intersection corner of its own region for the no-feedback schemes,
// corner_case_b / the dd-outer sum-rate vertex for the feedback schemes,
// and the closed per-user forms for the two symmetric schemes. Throws
// std::invalid_argument when the parameters leave the scheme's regime.
RatePair default_corner(ProtocolId id, const ChannelParams& p);

// The outer bound the scheme's empirical rates must respect: the no-feedback
// capacity region for the NN schemes, the feedback outer bound for the rest.
RateRegion outer_region(ProtocolId id, const ChannelParams& p);

// Message sizes whose ratio matches the corner, anchored at base size m:
// the symmetric schemes use (m, m); the others fix their driving message at
// m (w2 for the no-feedback schemes, w1 for the feedback schemes) and scale
// the other by the corner's rate ratio. A zero-rate component gets size 0.
std::pair<size_t, size_t> message_sizes(ProtocolId id, size_t m, const RatePair& corner);

struct SimConfig {
    ProtocolId protocol = ProtocolId::NnSemiblind;
    ChannelParams params;
    size_t m = 0;              // base message size, split by message_sizes
    double slack_coeff = 3.0;
    size_t trials = 1;
    uint64_t seed = 1;
    // Overrides default_corner for message sizing and comparisons.
    std::optional<RatePair> target_corner;
};

// Monte Carlo aggregate over independent trials. Rates are per-trial
// m_i / slots_used, averaged over decoding successes only; failures count
// toward failure_prob but never into the rate moments. Phase statistics and
// slot totals average over every trial (a failed trial still has a complete
// transmission). ci95_rate appears once 30 trials and two successes give the
// normal approximation footing. The ARQ means mirror ArqRepeatStats and are
// present only for schemes that report per-bit repeat bookkeeping.
struct SimStats {
    ProtocolId protocol = ProtocolId::NnSemiblind;
    ChannelParams params;
    size_t m1 = 0;
    size_t m2 = 0;
    RatePair corner{0.0, 0.0};  // the resolved comparison target
    size_t trials = 0;
    size_t failures = 0;
    double failure_prob = 0.0;
    RatePair mean_rate{0.0, 0.0};
    RatePair stderr_rate{0.0, 0.0};
    std::optional<RatePair> ci95_rate;
    double mean_slots = 0.0;
    std::vector<std::string> phase_ids;
    std::vector<double> mean_phase_lengths;  // aligned with phase_ids
    std::optional<double> mean_rx2_receptions;     // empirical E[K]
    std::optional<double> mean_excess_receptions;  // empirical E[(K-1)+]
};

// Runs cfg.trials independent trials. Each trial derives its state, cache,
// message, and coding streams from a sub-seed mixed out of (cfg.seed, trial
// index), so a SimConfig pins the entire experiment bit for bit no matter
// how many workers execute it. Configuration errors (bad parameters, a
// scheme outside its regime) propagate as exceptions; decode failures do
// not, they are counted.
SimStats run_trials(const SimConfig& cfg);

// Verdict of stats against a corner: each component with corner_i > 0 must
// sit within rel_tol relatively, and failure_prob under the ceiling.
struct ComparisonReport {
    RatePair corner{0.0, 0.0};
    RatePair mean_rate{0.0, 0.0};
    RatePair rel_err{0.0, 0.0};  // 0 for components with corner_i == 0
    double failure_prob = 0.0;
    double failure_ceiling = 0.0;
    bool rates_ok = false;
    bool failures_ok = false;
    bool pass = false;
};

ComparisonReport compare_to_corner(const SimStats& stats, const RatePair& corner,
                                   double rel_tol, double failure_ceiling = 0.01);

struct SweepOptions {
    size_t m = 4000;
    size_t trials = 20;
    uint64_t seed = 1;
    double slack_coeff = 3.0;
    double rel_tol = 0.03;
    double failure_ceiling = 0.01;
};

// One grid point of a sweep. Rows where the scheme rejects the parameters
// carry the error text and no stats; the sweep itself never throws on them.
struct SweepRow {
    ProtocolId protocol = ProtocolId::NnSemiblind;
    ChannelParams params;
    std::optional<SimStats> stats;
    std::optional<RatePair> corner;
    std::string error;  // empty unless the row was rejected
    bool pass = false;
};

// Runs the grid in order, one row per parameter point, each row seeded
// independently from opt.seed and the row index (stable under reordering of
// execution, rows never influence each other).
std::vector<SweepRow> sweep(const std::vector<ChannelParams>& grid, ProtocolId protocol,
                            const SweepOptions& opt);

// Serialized forms. JSON carries every SimStats field; CSV flattens the
// fixed-width part (phase means live in JSON only). Column names are listed
// in the README and stay in lockstep with these functions.
std::string to_json(const SimStats& s);
std::string to_json(const ComparisonReport& r);
std::string stats_csv_header();
std::string stats_csv_row(const SimStats& s);
std::string sweep_csv(const std::vector<SweepRow>& rows);
std::string sweep_json(const std::vector<SweepRow>& rows);

}  // namespace becsim
