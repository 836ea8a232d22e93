// Delayed state feedback from Rx1 only; encoder sees Rx2's cache mask and
// Rx1 holds all of w2 (eps1 = 0). Every w1 bit rides ARQ until Rx1's
// (delayed) state confirms it, each repeat superposed with a fresh w2
// combination. Rx1 strips the combination and reads its bit. Rx2 mines the
// same slots: a cached bit on top makes the slot a pure w2 equation, and
// consecutive receptions of an uncached bit cancel it pairwise. A short
// pure-w2 tail, sized from the observed repeat counts, lifts Rx2 to rank.

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "becsim/protocols.hpp"
#include "common.hpp"

namespace becsim {

namespace {

enum Stream : uint64_t { kStreamArq = 1, kStreamTail = 2 };

}  // namespace

ProtocolResult run_dn_semiblind_case_b(const ProtocolConfig& cfg, const CacheAssignment& cache,
                                       const MessagePair& msgs, const StateTrace& trace,
                                       Rng& rng) {
    detail::check_run_inputs(cfg, msgs, "run_dn_semiblind_case_b");
    detail::check_cache_shape(cfg, cache, "run_dn_semiblind_case_b");
    const ChannelParams& p = cfg.params;
    if (p.eps1 != 0.0)
        throw std::invalid_argument("run_dn_semiblind_case_b: needs eps1 = 0");
    if (p.delta1 >= 1.0 || (p.delta2 >= 1.0 && cfg.m2 > 0))
        throw std::invalid_argument("run_dn_semiblind_case_b: erasure probability 1 never delivers");

    const double c = cfg.slack_coeff;
    const size_t m1 = cfg.m1;
    const size_t m2 = cfg.m2;
    const double q2 = 1.0 - p.delta2;

    ProtocolResult res;
    res.plan.phases = {
        {"I", std::nullopt, "feedback-terminated: repeat each w1 bit until Rx1's state reads 1"},
        {"tail", std::nullopt,
         "sized after Phase I: expected Rx2 shortfall from observed repeats, plus cushion"},
    };

    detail::SlotRunner run(trace, cfg.record_transcript, "run_dn_semiblind_case_b");

    ArqRepeatStats arq;
    arq.repeats.assign(m1, 0);
    arq.rx2_receptions.assign(m1, 0);
    std::vector<uint32_t> bit_of_slot;

    run.begin_phase("I");
    {
        Rng g = rng.fork(kStreamArq);
        for (size_t j = 0; j < m1; ++j) {
            bool delivered = false;
            while (!delivered) {
                bit_of_slot.push_back(static_cast<uint32_t>(j));
                const bool x = msgs.w1.get(j) ^ dot(random_vector(m2, g), msgs.w2);
                const auto [s1, s2] = run.step(x);
                ++arq.repeats[j];
                arq.rx2_receptions[j] += s2;
                delivered = s1;
            }
        }
    }
    const size_t t_arq = run.used();

    // Tail length from the repeat counts the feedback did expose; Rx2's
    // actual reception pattern stays hidden, so its variance pads the
    // cushion.
    size_t t_tail = 0;
    if (m2 > 0) {
        double yield = 0.0;
        double var = 0.0;
        for (size_t j = 0; j < m1; ++j) {
            const detail::GroupYield g = cache.e2.get(j)
                                             ? detail::known_bit_yield(arq.repeats[j], q2)
                                             : detail::unknown_bit_yield(arq.repeats[j], q2);
            yield += g.mean;
            var += g.var;
        }
        const double shortfall = std::max(0.0, double(m2) - yield);
        const double surplus = std::max(0.0, yield - double(m2));
        const double sigma = std::sqrt(var + shortfall * p.delta2);
        const size_t margin = detail::margin_rows(c, sigma);
        const size_t uncovered = margin > surplus ? margin - static_cast<size_t>(surplus) : 0;
        t_tail = detail::ceil_div_prob(shortfall, q2) +
                 detail::extra_slots(c, m2, uncovered, q2);
    }

    run.begin_phase("tail");
    {
        Rng g = rng.fork(kStreamTail);
        for (size_t s = 0; s < t_tail; ++s) run.step(dot(random_vector(m2, g), msgs.w2));
    }

    std::string note;

    // Rx1: every group ends in a delivered slot; strip the w2 combination.
    if (m1 == 0) {
        res.decoded1 = BitVector(0);
    } else {
        BitVector w1(m1);
        Rng g = rng.fork(kStreamArq);
        for (size_t t = 0; t < t_arq; ++t) {
            const BitVector row = random_vector(m2, g);
            if (run.got1(t)) w1.set(bit_of_slot[t], run.sent(t) ^ dot(row, msgs.w2));
        }
        res.decoded1 = std::move(w1);
    }

    // Rx2: cached groups yield one equation per reception, uncached groups
    // one per consecutive reception pair (the unknown bit cancels).
    if (m2 == 0) {
        res.decoded2 = BitVector(0);
    } else {
        const BitVector w1cached = detail::masked_values(msgs.w1, cache.e2);
        LinearSystem sys(m2);
        sys.coefficients.reserve_rows(run.diags()[0].eq_rx2 + run.diags()[1].eq_rx2);
        Rng g = rng.fork(kStreamArq);
        BitVector prev_row;
        bool prev_y = false;
        bool have_prev = false;
        uint32_t prev_bit = 0;
        for (size_t t = 0; t < t_arq; ++t) {
            const BitVector row = random_vector(m2, g);
            const uint32_t j = bit_of_slot[t];
            if (have_prev && prev_bit != j) have_prev = false;
            if (!run.got2(t)) continue;
            if (cache.e2.get(j)) {
                sys.add_equation(row, run.sent(t) ^ w1cached.get(j));
            } else {
                if (have_prev && prev_bit == j) {
                    BitVector pair = row;
                    pair.xor_with(prev_row);
                    sys.add_equation(pair, run.sent(t) ^ prev_y);
                }
                prev_row = row;
                prev_y = run.sent(t);
                prev_bit = j;
                have_prev = true;
            }
        }
        {
            Rng gt = rng.fork(kStreamTail);
            for (size_t s = 0; s < t_tail; ++s) {
                const BitVector row = random_vector(m2, gt);
                if (run.got2(t_arq + s)) sys.add_equation(row, run.sent(t_arq + s));
            }
        }
        res.decoded2 = detail::try_solve(sys, "rx2 w2", note);
    }

    res.arq = std::move(arq);
    res.phases = run.take_diags();
    res.slots_used = run.used();
    res.transcript = run.take_transcript();
    res.failure_note = std::move(note);
    return res;
}

}  // namespace becsim
