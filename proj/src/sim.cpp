#include "becsim/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <stdexcept>
#include <thread>

#include "becsim/protocols.hpp"
#include "json.hpp"

namespace becsim {

namespace {

struct ProtocolEntry {
    ProtocolId id;
    std::string_view name;
};

constexpr ProtocolEntry kProtocolTable[] = {
    {ProtocolId::NnSemiblind, "nn-semiblind"},
    {ProtocolId::NnBlindSymmetric, "nn-blind-symmetric"},
    {ProtocolId::NnBlindInner, "nn-blind-inner"},
    {ProtocolId::DnCaseB, "case-b"},
    {ProtocolId::DnCaseC, "case-c"},
    {ProtocolId::DdBlindSymmetric, "dd-blind-symmetric"},
};

// Same two-step derivation Rng::fork applies, exposed as seed -> seed so a
// trial or sweep row can be handed a plain integer and reconstruct its whole
// stream family. Distinct salts give unrelated streams for any fixed seed.
uint64_t derive_seed(uint64_t seed, uint64_t salt) {
    uint64_t sm = seed;
    const uint64_t a = detail::splitmix64(sm);
    sm = a ^ (salt * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL);
    return detail::splitmix64(sm);
}

// Sweep rows salt from a different base than trial indices so a row seed and
// a trial seed never coincide by construction.
constexpr uint64_t kRowSaltBase = 1000003;

// Slot supply for one trial: four times the per-message erased-channel cost,
// plus a flat floor. Every scheme's expected length, margins included, sits
// well under twice the naive cost, so the runners never exhaust the trace;
// they only read the slots they use.
size_t trace_budget(const ChannelParams& p, size_t m1, size_t m2) {
    double slots = 1024.0;
    if (m1 > 0) slots += 4.0 * static_cast<double>(m1) / std::max(1.0 - p.delta1, 1e-3);
    if (m2 > 0) slots += 4.0 * static_cast<double>(m2) / std::max(1.0 - p.delta2, 1e-3);
    return static_cast<size_t>(slots);
}

ProtocolResult dispatch(ProtocolId id, const ProtocolConfig& cfg, const CacheAssignment& cache,
                        const MessagePair& msgs, const StateTrace& trace, Rng& rng) {
    switch (id) {
        case ProtocolId::NnSemiblind:
            return run_nn_semiblind(cfg, cache, msgs, trace, rng);
        case ProtocolId::NnBlindSymmetric:
            return run_nn_blind_symmetric(cfg, msgs, trace, rng);
        case ProtocolId::NnBlindInner:
            return run_nn_blind_inner(cfg, msgs, trace, rng);
        case ProtocolId::DnCaseB:
            return run_dn_semiblind_case_b(cfg, cache, msgs, trace, rng);
        case ProtocolId::DnCaseC:
            return run_dn_nonblind_case_c(cfg, cache, msgs, trace, rng);
        case ProtocolId::DdBlindSymmetric:
            return run_dd_blind_symmetric(cfg, msgs, trace, rng);
    }
    throw std::invalid_argument("dispatch: unknown protocol id");
}

struct TrialOutcome {
    bool success = false;
    double r1 = 0.0;
    double r2 = 0.0;
    double slots = 0.0;
    std::vector<std::string> phase_ids;
    std::vector<size_t> phase_slots;
    std::optional<double> k_mean;
    std::optional<double> k_excess;
};

TrialOutcome run_one(const SimConfig& cfg, size_t m1, size_t m2, uint64_t trial_seed) {
    Rng master(trial_seed);
    Rng state_rng = master.fork(1);
    Rng cache_rng = master.fork(2);
    Rng msg_rng = master.fork(3);
    Rng run_rng = master.fork(4);
    const StateTrace trace =
        sample_states(cfg.params, trace_budget(cfg.params, m1, m2), state_rng);
    const CacheAssignment cache = sample_cache(cfg.params, m1, m2, cache_rng);
    const MessagePair msgs{random_vector(m1, msg_rng), random_vector(m2, msg_rng)};

    ProtocolConfig pcfg;
    pcfg.params = cfg.params;
    pcfg.m1 = m1;
    pcfg.m2 = m2;
    pcfg.slack_coeff = cfg.slack_coeff;
    pcfg.seed = trial_seed;
    const ProtocolResult res = dispatch(cfg.protocol, pcfg, cache, msgs, trace, run_rng);

    TrialOutcome out;
    // A decode that comes back wrong counts as a failure like a rank
    // shortfall does; rate means only ever average verified deliveries.
    out.success = res.success() && *res.decoded1 == msgs.w1 && *res.decoded2 == msgs.w2;
    out.slots = static_cast<double>(res.slots_used);
    if (out.success && res.slots_used > 0) {
        out.r1 = static_cast<double>(m1) / out.slots;
        out.r2 = static_cast<double>(m2) / out.slots;
    }
    out.phase_ids.reserve(res.plan.phases.size());
    for (const PhaseSpec& ph : res.plan.phases) out.phase_ids.push_back(ph.id);
    out.phase_slots = res.phase_lengths();
    if (res.arq) {
        out.k_mean = res.arq->mean_rx2_receptions();
        out.k_excess = res.arq->mean_excess_receptions();
    }
    return out;
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

nlohmann::json rate_pair_json(const RatePair& r) {
    return nlohmann::json{{"r1", r.r1}, {"r2", r.r2}};
}

nlohmann::json params_json(const ChannelParams& p) {
    return nlohmann::json{
        {"delta1", p.delta1}, {"delta2", p.delta2}, {"eps1", p.eps1}, {"eps2", p.eps2}};
}

nlohmann::json stats_json(const SimStats& s) {
    nlohmann::json j;
    j["protocol"] = std::string(protocol_name(s.protocol));
    j["params"] = params_json(s.params);
    j["m1"] = s.m1;
    j["m2"] = s.m2;
    j["corner"] = rate_pair_json(s.corner);
    j["trials"] = s.trials;
    j["failures"] = s.failures;
    j["failure_prob"] = s.failure_prob;
    j["mean_rate"] = rate_pair_json(s.mean_rate);
    j["stderr_rate"] = rate_pair_json(s.stderr_rate);
    j["ci95_rate"] = s.ci95_rate ? rate_pair_json(*s.ci95_rate) : nlohmann::json();
    j["mean_slots"] = s.mean_slots;
    nlohmann::json phases = nlohmann::json::array();
    for (size_t i = 0; i < s.phase_ids.size(); ++i)
        phases.push_back({{"id", s.phase_ids[i]}, {"mean_slots", s.mean_phase_lengths[i]}});
    j["phases"] = phases;
    j["mean_rx2_receptions"] =
        s.mean_rx2_receptions ? nlohmann::json(*s.mean_rx2_receptions) : nlohmann::json();
    j["mean_excess_receptions"] =
        s.mean_excess_receptions ? nlohmann::json(*s.mean_excess_receptions) : nlohmann::json();
    return j;
}

}  // namespace

std::string_view protocol_name(ProtocolId id) {
    for (const ProtocolEntry& e : kProtocolTable)
        if (e.id == id) return e.name;
    throw std::invalid_argument("protocol_name: unknown protocol id");
}

std::optional<ProtocolId> protocol_from_name(std::string_view name) {
    for (const ProtocolEntry& e : kProtocolTable)
        if (e.name == name) return e.id;
    return std::nullopt;
}

const std::vector<ProtocolId>& all_protocols() {
    static const std::vector<ProtocolId> ids = [] {
        std::vector<ProtocolId> v;
        for (const ProtocolEntry& e : kProtocolTable) v.push_back(e.id);
        return v;
    }();
    return ids;
}

RatePair default_corner(ProtocolId id, const ChannelParams& p) {
    p.validate();
    switch (id) {
        case ProtocolId::NnSemiblind:
            return max_sum_rate_vertex(region_nn_nonblind(p));
        case ProtocolId::NnBlindSymmetric: {
            if (p.delta1 != p.delta2 || p.eps1 != p.eps2)
                throw std::invalid_argument(
                    "default_corner: the blind symmetric scheme needs delta1 == delta2 and "
                    "eps1 == eps2");
            const double r = (1.0 - p.delta1) / (1.0 + p.eps1);
            return {r, r};
        }
        case ProtocolId::NnBlindInner:
            return max_sum_rate_vertex(region_nn_blind_inner(p));
        case ProtocolId::DnCaseB:
            return corner_case_b(p);
        case ProtocolId::DnCaseC:
            return max_sum_rate_vertex(region_dd_outer(p));
        case ProtocolId::DdBlindSymmetric: {
            if (p.delta1 != p.delta2 || p.eps1 != p.eps2)
                throw std::invalid_argument(
                    "default_corner: the two-sided-feedback blind scheme needs delta1 == delta2 "
                    "and eps1 == eps2");
            const double r =
                (1.0 - p.delta1 * p.delta1) / (1.0 + p.delta1 + p.eps1);
            return {r, r};
        }
    }
    throw std::invalid_argument("default_corner: unknown protocol id");
}

RateRegion outer_region(ProtocolId id, const ChannelParams& p) {
    switch (id) {
        case ProtocolId::NnSemiblind:
        case ProtocolId::NnBlindSymmetric:
        case ProtocolId::NnBlindInner:
            return region_nn_nonblind(p);
        case ProtocolId::DnCaseB:
        case ProtocolId::DnCaseC:
        case ProtocolId::DdBlindSymmetric:
            return region_dd_outer(p);
    }
    throw std::invalid_argument("outer_region: unknown protocol id");
}

std::pair<size_t, size_t> message_sizes(ProtocolId id, size_t m, const RatePair& corner) {
    if (m == 0) throw std::invalid_argument("message_sizes: base size must be positive");
    switch (id) {
        case ProtocolId::NnBlindSymmetric:
        case ProtocolId::DdBlindSymmetric:
            return {m, m};
        case ProtocolId::NnSemiblind:
        case ProtocolId::NnBlindInner: {
            if (corner.r2 <= 0.0) return {m, 0};
            if (corner.r1 <= 0.0) return {0, m};
            const auto m1 = static_cast<size_t>(
                std::llround(static_cast<double>(m) * corner.r1 / corner.r2));
            return {std::max<size_t>(m1, 1), m};
        }
        case ProtocolId::DnCaseB:
        case ProtocolId::DnCaseC: {
            if (corner.r1 <= 0.0) return {0, m};
            if (corner.r2 <= 0.0) return {m, 0};
            const auto m2 = static_cast<size_t>(
                std::llround(static_cast<double>(m) * corner.r2 / corner.r1));
            return {m, std::max<size_t>(m2, 1)};
        }
    }
    throw std::invalid_argument("message_sizes: unknown protocol id");
}

SimStats run_trials(const SimConfig& cfg) {
    cfg.params.validate();
    if (cfg.trials == 0) throw std::invalid_argument("run_trials: needs at least one trial");
    if (cfg.m == 0) throw std::invalid_argument("run_trials: base message size must be positive");
    if (cfg.slack_coeff < 0.0)
        throw std::invalid_argument("run_trials: slack coefficient must be nonnegative");

    const RatePair corner =
        cfg.target_corner ? *cfg.target_corner : default_corner(cfg.protocol, cfg.params);
    const auto [m1, m2] = message_sizes(cfg.protocol, cfg.m, corner);

    std::vector<TrialOutcome> outcomes(cfg.trials);
    std::vector<std::exception_ptr> errors(cfg.trials);
    std::atomic<size_t> cursor{0};
    const auto worker = [&] {
        for (size_t t; (t = cursor.fetch_add(1)) < cfg.trials;) {
            try {
                outcomes[t] = run_one(cfg, m1, m2, derive_seed(cfg.seed, t));
            } catch (...) {
                errors[t] = std::current_exception();
            }
        }
    };
    const size_t hw = std::max<unsigned>(std::thread::hardware_concurrency(), 1);
    const size_t workers = std::min<size_t>(hw, cfg.trials);
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (std::thread& th : pool) th.join();
    }
    // Configuration errors are deterministic per config, so the lowest trial
    // index carries the same message every worker saw.
    for (const std::exception_ptr& e : errors)
        if (e) std::rethrow_exception(e);

    SimStats s;
    s.protocol = cfg.protocol;
    s.params = cfg.params;
    s.m1 = m1;
    s.m2 = m2;
    s.corner = corner;
    s.trials = cfg.trials;
    s.phase_ids = outcomes.front().phase_ids;
    s.mean_phase_lengths.assign(s.phase_ids.size(), 0.0);

    size_t successes = 0;
    double sum1 = 0.0, sum2 = 0.0, sq1 = 0.0, sq2 = 0.0;
    double slot_sum = 0.0, k_sum = 0.0, kx_sum = 0.0;
    size_t arq_count = 0;
    for (const TrialOutcome& out : outcomes) {
        if (out.phase_ids != s.phase_ids)
            throw std::logic_error("run_trials: phase plan diverged across trials");
        slot_sum += out.slots;
        for (size_t i = 0; i < out.phase_slots.size(); ++i)
            s.mean_phase_lengths[i] += static_cast<double>(out.phase_slots[i]);
        if (out.k_mean) {
            k_sum += *out.k_mean;
            kx_sum += *out.k_excess;
            ++arq_count;
        }
        if (!out.success) continue;
        ++successes;
        sum1 += out.r1;
        sum2 += out.r2;
        sq1 += out.r1 * out.r1;
        sq2 += out.r2 * out.r2;
    }
    const double n_all = static_cast<double>(cfg.trials);
    s.failures = cfg.trials - successes;
    s.failure_prob = static_cast<double>(s.failures) / n_all;
    s.mean_slots = slot_sum / n_all;
    for (double& v : s.mean_phase_lengths) v /= n_all;
    if (successes > 0) {
        const double n = static_cast<double>(successes);
        s.mean_rate = {sum1 / n, sum2 / n};
        if (successes >= 2) {
            const double var1 = std::max(0.0, (sq1 - n * s.mean_rate.r1 * s.mean_rate.r1) / (n - 1.0));
            const double var2 = std::max(0.0, (sq2 - n * s.mean_rate.r2 * s.mean_rate.r2) / (n - 1.0));
            s.stderr_rate = {std::sqrt(var1 / n), std::sqrt(var2 / n)};
            if (cfg.trials >= 30)
                s.ci95_rate = RatePair{1.96 * s.stderr_rate.r1, 1.96 * s.stderr_rate.r2};
        }
    }
    if (arq_count == cfg.trials) {
        s.mean_rx2_receptions = k_sum / n_all;
        s.mean_excess_receptions = kx_sum / n_all;
    }
    return s;
}

ComparisonReport compare_to_corner(const SimStats& stats, const RatePair& corner, double rel_tol,
                                   double failure_ceiling) {
    if (rel_tol <= 0.0) throw std::invalid_argument("compare_to_corner: rel_tol must be positive");
    ComparisonReport rep;
    rep.corner = corner;
    rep.mean_rate = stats.mean_rate;
    rep.failure_prob = stats.failure_prob;
    rep.failure_ceiling = failure_ceiling;
    rep.rates_ok = true;
    if (corner.r1 > 0.0) {
        rep.rel_err.r1 = std::abs(stats.mean_rate.r1 - corner.r1) / corner.r1;
        rep.rates_ok = rep.rates_ok && rep.rel_err.r1 <= rel_tol;
    }
    if (corner.r2 > 0.0) {
        rep.rel_err.r2 = std::abs(stats.mean_rate.r2 - corner.r2) / corner.r2;
        rep.rates_ok = rep.rates_ok && rep.rel_err.r2 <= rel_tol;
    }
    rep.failures_ok = stats.failure_prob < failure_ceiling;
    rep.pass = rep.rates_ok && rep.failures_ok;
    return rep;
}

std::vector<SweepRow> sweep(const std::vector<ChannelParams>& grid, ProtocolId protocol,
                            const SweepOptions& opt) {
    if (grid.empty()) throw std::invalid_argument("sweep: parameter grid is empty");
    std::vector<SweepRow> rows;
    rows.reserve(grid.size());
    for (size_t i = 0; i < grid.size(); ++i) {
        SweepRow row;
        row.protocol = protocol;
        row.params = grid[i];
        try {
            SimConfig cfg;
            cfg.protocol = protocol;
            cfg.params = grid[i];
            cfg.m = opt.m;
            cfg.slack_coeff = opt.slack_coeff;
            cfg.trials = opt.trials;
            cfg.seed = derive_seed(opt.seed, kRowSaltBase + i);
            SimStats st = run_trials(cfg);
            row.corner = st.corner;
            row.pass = compare_to_corner(st, st.corner, opt.rel_tol, opt.failure_ceiling).pass;
            row.stats = std::move(st);
        } catch (const std::exception& e) {
            row.error = e.what();
            row.pass = false;
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string to_json(const SimStats& s) { return stats_json(s).dump(); }

std::string to_json(const ComparisonReport& r) {
    nlohmann::json j;
    j["corner"] = rate_pair_json(r.corner);
    j["mean_rate"] = rate_pair_json(r.mean_rate);
    j["rel_err"] = rate_pair_json(r.rel_err);
    j["failure_prob"] = r.failure_prob;
    j["failure_ceiling"] = r.failure_ceiling;
    j["rates_ok"] = r.rates_ok;
    j["failures_ok"] = r.failures_ok;
    j["pass"] = r.pass;
    return j.dump();
}

std::string stats_csv_header() {
    return "protocol,delta1,delta2,eps1,eps2,m1,m2,trials,failures,failure_prob,"
           "mean_r1,mean_r2,stderr_r1,stderr_r2,mean_slots,corner_r1,corner_r2";
}

std::string stats_csv_row(const SimStats& s) {
    std::string out;
    out += protocol_name(s.protocol);
    const double params[] = {s.params.delta1, s.params.delta2, s.params.eps1, s.params.eps2};
    for (double v : params) out += "," + fmt_double(v);
    out += "," + std::to_string(s.m1) + "," + std::to_string(s.m2);
    out += "," + std::to_string(s.trials) + "," + std::to_string(s.failures);
    const double vals[] = {s.failure_prob,     s.mean_rate.r1,   s.mean_rate.r2,
                           s.stderr_rate.r1,   s.stderr_rate.r2, s.mean_slots,
                           s.corner.r1,        s.corner.r2};
    for (double v : vals) out += "," + fmt_double(v);
    return out;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::string out = stats_csv_header() + ",pass,error\n";
    for (const SweepRow& row : rows) {
        if (row.stats) {
            out += stats_csv_row(*row.stats);
        } else {
            out += protocol_name(row.protocol);
            const double params[] = {row.params.delta1, row.params.delta2, row.params.eps1,
                                     row.params.eps2};
            for (double v : params) out += "," + fmt_double(v);
            out += ",,,,,,,,,,,,";  // m1 through corner_r2 are unknown
        }
        out += row.pass ? ",1," : ",0,";
        out += csv_escape(row.error);
        out += '\n';
    }
    return out;
}

std::string sweep_json(const std::vector<SweepRow>& rows) {
    nlohmann::json arr = nlohmann::json::array();
    for (const SweepRow& row : rows) {
        nlohmann::json j;
        j["protocol"] = std::string(protocol_name(row.protocol));
        j["params"] = params_json(row.params);
        j["stats"] = row.stats ? stats_json(*row.stats) : nlohmann::json();
        j["corner"] = row.corner ? rate_pair_json(*row.corner) : nlohmann::json();
        j["error"] = row.error;
        j["pass"] = row.pass;
        arr.push_back(j);
    }
    return arr.dump();
}

}  // namespace becsim
