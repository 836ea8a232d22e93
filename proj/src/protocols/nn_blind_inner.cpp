// No CSIT, blind encoder, one-sided caching (eps1 = 0, so Rx1 holds all of
// w2). Phase I superposes one uncoded w1 bit per slot on a fresh w2
// combination: Rx1 strips the combination and reads the bit; Rx2 keeps the
// slots whose w1 bit its cache covers, which turns them into pure w2
// equations. A pure-w2 tail tops Rx2's system up to rank (it also absorbs
// any structural shortfall when m1 is below the balanced ratio), and Phase
// II fountains over w1 to repair Rx1's erasures. Caches are drawn inside,
// after the schedule is fixed.

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "becsim/protocols.hpp"
#include "common.hpp"

namespace becsim {

namespace {

enum Stream : uint64_t { kStreamCache = 0, kStreamIW2 = 1, kStreamTailW2 = 2, kStreamIIW1 = 3 };

}  // namespace

ProtocolResult run_nn_blind_inner(const ProtocolConfig& cfg, const MessagePair& msgs,
                                  const StateTrace& trace, Rng& rng) {
    detail::check_run_inputs(cfg, msgs, "run_nn_blind_inner");
    const ChannelParams& p = cfg.params;
    if (p.eps1 != 0.0)
        throw std::invalid_argument("run_nn_blind_inner: needs eps1 = 0 (Rx1 holds all of w2)");
    if (p.delta2 < p.delta1)
        throw std::invalid_argument("run_nn_blind_inner: needs delta2 >= delta1");
    if (p.delta1 >= 1.0 || p.delta2 >= 1.0)
        throw std::invalid_argument("run_nn_blind_inner: erasure probability 1 never delivers");

    const double c = cfg.slack_coeff;
    const size_t m1 = cfg.m1;
    const size_t m2 = cfg.m2;
    const double p1 = 1.0 - p.delta1;
    const double p2 = 1.0 - p.delta2;

    // Rx2 collects a pure w2 equation whenever a Phase-I slot lands there
    // with a cached w1 bit on top: probability (1-eps2)(1-delta2) per slot.
    // The tail covers the expected shortfall against m2 plus a cushion for
    // the two counts the encoder cannot see.
    size_t t_tail = 0;
    if (m2 > 0) {
        const double p_keep = (1.0 - p.eps2) * p2;
        const double yield = double(m1) * p_keep;
        const double shortfall = std::max(0.0, double(m2) - yield);
        const double sigma =
            std::sqrt(double(m1) * p_keep * (1.0 - p_keep) + shortfall * p.delta2);
        t_tail = detail::ceil_div_prob(shortfall, p2) +
                 detail::extra_slots(c, m2, detail::margin_rows(c, sigma), p2);
    }

    // Phase II repairs Rx1's Phase-I erasures: about delta1 * m1 unknowns.
    size_t t2 = 0;
    if (m1 > 0 && p.delta1 > 0.0) {
        const double nominal = p.delta1 * double(m1) / p1;
        const double sigma =
            std::sqrt(double(m1) * p.delta1 * p1 + nominal * p1 * p.delta1);
        t2 = static_cast<size_t>(std::ceil(nominal)) +
             detail::extra_slots(c, m1, detail::margin_rows(c, sigma), p1);
    }

    ProtocolResult res;
    res.plan.phases = {
        {"I", m1, "fixed: one w1 bit per slot over a w2 combination"},
        {"I-tail", t_tail, "fixed: pure w2 fountain topping up Rx2"},
        {"II", t2, "fixed: w1 fountain repairing Rx1's erasures"},
    };

    detail::SlotRunner run(trace, cfg.record_transcript, "run_nn_blind_inner");
    run.begin_phase("I");
    {
        Rng g = rng.fork(kStreamIW2);
        for (size_t j = 0; j < m1; ++j)
            run.step(msgs.w1.get(j) ^ dot(random_vector(m2, g), msgs.w2));
    }
    run.begin_phase("I-tail");
    {
        Rng g = rng.fork(kStreamTailW2);
        for (size_t s = 0; s < t_tail; ++s) run.step(dot(random_vector(m2, g), msgs.w2));
    }
    run.begin_phase("II");
    {
        Rng g = rng.fork(kStreamIIW1);
        for (size_t s = 0; s < t2; ++s) run.step(dot(random_vector(m1, g), msgs.w1));
    }

    Rng cache_rng = rng.fork(kStreamCache);
    const CacheAssignment cache = sample_cache(p, m1, m2, cache_rng);

    std::string note;

    // Rx1: strip w2 (its cache holds all of it) from each received Phase-I
    // slot to read that w1 bit, then close the erased ones over Phase II.
    if (m1 == 0) {
        res.decoded1 = BitVector(0);
    } else {
        BitVector known1(m1);
        BitVector missing(m1);
        {
            Rng g = rng.fork(kStreamIW2);
            for (size_t j = 0; j < m1; ++j) {
                const BitVector row = random_vector(m2, g);
                if (run.got1(j))
                    known1.set(j, run.sent(j) ^ dot(row, msgs.w2));
                else
                    missing.set(j, true);
            }
        }
        const size_t n_missing = missing.count_ones();
        if (n_missing == 0) {
            res.decoded1 = known1;
        } else {
            LinearSystem sys(n_missing);
            sys.coefficients.reserve_rows(run.diags()[2].eq_rx1);
            Rng g = rng.fork(kStreamIIW1);
            const size_t base = m1 + t_tail;
            for (size_t s = 0; s < t2; ++s) {
                const BitVector row = random_vector(m1, g);
                if (run.got1(base + s))
                    detail::add_masked_equation(sys, row, missing, n_missing, known1,
                                                run.sent(base + s));
            }
            if (auto sol = detail::try_solve(sys, "rx1 w1 erasures", note)) {
                BitVector w1 = expand_bits(*sol, missing);
                w1.xor_with(known1);
                res.decoded1 = std::move(w1);
            }
        }
    }

    // Rx2: Phase-I slots with a cached w1 bit on top plus the tail give a
    // plain w2 system.
    if (m2 == 0) {
        res.decoded2 = BitVector(0);
    } else {
        const BitVector w1cached = detail::masked_values(msgs.w1, cache.e2);
        LinearSystem sys(m2);
        sys.coefficients.reserve_rows(run.diags()[0].eq_rx2 + run.diags()[1].eq_rx2);
        {
            Rng g = rng.fork(kStreamIW2);
            for (size_t j = 0; j < m1; ++j) {
                const BitVector row = random_vector(m2, g);
                if (run.got2(j) && cache.e2.get(j))
                    sys.add_equation(row, run.sent(j) ^ w1cached.get(j));
            }
        }
        {
            Rng g = rng.fork(kStreamTailW2);
            for (size_t s = 0; s < t_tail; ++s) {
                const BitVector row = random_vector(m2, g);
                if (run.got2(m1 + s)) sys.add_equation(row, run.sent(m1 + s));
            }
        }
        res.decoded2 = detail::try_solve(sys, "rx2 w2", note);
    }

    res.phases = run.take_diags();
    res.slots_used = run.used();
    res.transcript = run.take_transcript();
    res.failure_note = std::move(note);
    return res;
}

}  // namespace becsim
