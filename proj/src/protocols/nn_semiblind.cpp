// No CSIT, encoder sees Rx2's cache mask only. Phase I-a floods w2
// combinations so Rx1 can fill in its uncached share of w2; Phase I-b
// superposes combinations of the Rx2-cached part of w1 on fresh w2
// combinations, long enough that Rx2's whole-Phase-I system and Rx1's
// w1-part system both close; Phase II carries the remaining w1 bits. All
// three lengths are fixed up front: with no feedback the cushions come from
// the count variances the encoder cannot observe.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "becsim/protocols.hpp"
#include "common.hpp"

namespace becsim {

namespace {

// Coding streams, forked from the run rng so decoders regenerate any row
// from (stream, slot) instead of storing it.
enum Stream : uint64_t { kStreamIa = 1, kStreamIbW1 = 2, kStreamIbW2 = 3, kStreamII = 4 };

}  // namespace

ProtocolResult run_nn_semiblind(const ProtocolConfig& cfg, const CacheAssignment& cache,
                                const MessagePair& msgs, const StateTrace& trace, Rng& rng) {
    detail::check_run_inputs(cfg, msgs, "run_nn_semiblind");
    detail::check_cache_shape(cfg, cache, "run_nn_semiblind");
    const ChannelParams& p = cfg.params;
    if (p.delta2 < p.delta1)
        throw std::invalid_argument("run_nn_semiblind: needs delta2 >= delta1");
    if (p.delta1 >= 1.0 || p.delta2 >= 1.0)
        throw std::invalid_argument("run_nn_semiblind: erasure probability 1 never delivers");

    const double c = cfg.slack_coeff;
    const double p1 = 1.0 - p.delta1;
    const double p2 = 1.0 - p.delta2;
    const size_t m1 = cfg.m1;
    const size_t m2 = cfg.m2;

    // Encoder-side cache knowledge: e2 splits w1 into the part Rx2 already
    // holds (compact w1c) and the rest (w1u).
    const BitVector& e2 = cache.e2;
    const size_t n12 = e2.count_ones();
    const size_t n12u = m1 - n12;
    const BitVector e2c = detail::invert_mask(e2);
    const BitVector w1c = compress_bits(msgs.w1, e2, n12);
    const BitVector w1u = compress_bits(msgs.w1, e2c, n12u);

    // Phase I-a feeds Rx1's w2 decode. Its unknown count (Rx1's uncached
    // share) and Rx1's reception count are both invisible here, so both
    // variances enter the cushion.
    size_t t_a = 0;
    if (m2 > 0 && p.eps1 > 0.0) {
        const double nominal = p.eps1 * double(m2) / p1;
        const double sigma =
            std::sqrt(double(m2) * p.eps1 * (1.0 - p.eps1) + nominal * p1 * p.delta1);
        t_a = static_cast<size_t>(std::ceil(nominal)) +
              detail::extra_slots(c, m2, detail::margin_rows(c, sigma), p1);
    }

    // Phase I-b closes two systems at once: Rx2 needs m2 equations across
    // all of Phase I, and Rx1 needs n12 equations from I-b alone. The n12
    // unknowns are exact (e2 is visible); the reception counts are not.
    size_t t_b = 0;
    if (m2 > 0) {
        const double total0 = std::max(double(m2) / p2, double(t_a));
        const double sigma = std::sqrt(total0 * p2 * p.delta2);
        const size_t nominal = detail::ceil_div_prob(double(m2), p2);
        const size_t need =
            std::min(detail::ceil_div_prob(double(m2) + detail::margin_rows(c, sigma), p2),
                     nominal + detail::slack_cap(c, m2));
        t_b = need > t_a ? need - t_a : 0;
    }
    if (n12 > 0) {
        const double sigma = std::sqrt(double(n12) / p1 * p1 * p.delta1);
        const size_t need =
            std::min(detail::ceil_div_prob(double(n12) + detail::margin_rows(c, sigma), p1),
                     detail::ceil_div_prob(double(n12), p1) + detail::slack_cap(c, m1));
        t_b = std::max(t_b, need);
    }

    // Phase II carries the rest of w1 for Rx1 alone.
    size_t t2 = 0;
    if (n12u > 0) {
        const double sigma = std::sqrt(double(n12u) / p1 * p1 * p.delta1);
        t2 = std::min(detail::ceil_div_prob(double(n12u) + detail::margin_rows(c, sigma), p1),
                      detail::ceil_div_prob(double(n12u), p1) + detail::slack_cap(c, m1));
    }

    ProtocolResult res;
    res.plan.phases = {
        {"I-a", t_a, "fixed: w2 fountain sized for Rx1's uncached share"},
        {"I-b", t_b, "fixed: closes Rx2's Phase-I system and Rx1's cached-w1 system"},
        {"II", t2, "fixed: fountain over the w1 bits Rx2 lacks"},
    };

    detail::SlotRunner run(trace, cfg.record_transcript, "run_nn_semiblind");

    run.begin_phase("I-a");
    {
        Rng g = rng.fork(kStreamIa);
        for (size_t t = 0; t < t_a; ++t) run.step(dot(random_vector(m2, g), msgs.w2));
    }
    run.begin_phase("I-b");
    {
        Rng g1 = rng.fork(kStreamIbW1);
        Rng g2 = rng.fork(kStreamIbW2);
        for (size_t t = 0; t < t_b; ++t) {
            const bool xc = dot(random_vector(n12, g1), w1c);
            run.step(xc ^ dot(random_vector(m2, g2), msgs.w2));
        }
    }
    run.begin_phase("II");
    {
        Rng g = rng.fork(kStreamII);
        for (size_t t = 0; t < t2; ++t) run.step(dot(random_vector(n12u, g), w1u));
    }

    std::string note;

    // Rx1 decodes in three stages: w2 from I-a (cache fills the rest), the
    // Rx2-cached part of w1 from I-b once w2 is strippable, the remaining
    // w1 bits from Phase II.
    if (m1 == 0) {
        res.decoded1 = BitVector(0);
    } else {
        const BitVector w2cached = detail::masked_values(msgs.w2, cache.e1);
        const BitVector e1c = detail::invert_mask(cache.e1);
        const size_t nu2 = m2 - cache.e1.count_ones();

        std::optional<BitVector> w2hat;
        if (nu2 == 0) {
            w2hat = w2cached;
        } else {
            LinearSystem sys(nu2);
            sys.coefficients.reserve_rows(run.diags()[0].eq_rx1);
            Rng g = rng.fork(kStreamIa);
            for (size_t t = 0; t < t_a; ++t) {
                const BitVector row = random_vector(m2, g);
                if (run.got1(t))
                    detail::add_masked_equation(sys, row, e1c, nu2, w2cached, run.sent(t));
            }
            if (auto sol = detail::try_solve(sys, "rx1 w2", note)) {
                BitVector full = expand_bits(*sol, e1c);
                full.xor_with(w2cached);
                w2hat = std::move(full);
            }
        }

        std::optional<BitVector> w1c_hat;
        if (n12 == 0) {
            w1c_hat = BitVector(0);
        } else if (w2hat) {
            LinearSystem sys(n12);
            sys.coefficients.reserve_rows(run.diags()[1].eq_rx1);
            Rng g1 = rng.fork(kStreamIbW1);
            Rng g2 = rng.fork(kStreamIbW2);
            for (size_t t = 0; t < t_b; ++t) {
                const BitVector rowc = random_vector(n12, g1);
                const BitVector row2 = random_vector(m2, g2);
                if (run.got1(t_a + t))
                    sys.add_equation(rowc, run.sent(t_a + t) ^ dot(row2, *w2hat));
            }
            w1c_hat = detail::try_solve(sys, "rx1 w1 shared part", note);
        }

        std::optional<BitVector> w1u_hat;
        if (n12u == 0) {
            w1u_hat = BitVector(0);
        } else {
            LinearSystem sys(n12u);
            sys.coefficients.reserve_rows(run.diags()[2].eq_rx1);
            Rng g = rng.fork(kStreamII);
            for (size_t t = 0; t < t2; ++t) {
                const BitVector row = random_vector(n12u, g);
                if (run.got1(t_a + t_b + t)) sys.add_equation(row, run.sent(t_a + t_b + t));
            }
            w1u_hat = detail::try_solve(sys, "rx1 w1 private part", note);
        }

        if (w1c_hat && w1u_hat) {
            BitVector w1 = expand_bits(*w1c_hat, e2);
            w1.xor_with(expand_bits(*w1u_hat, e2c));
            res.decoded1 = std::move(w1);
        }
    }

    // Rx2 strips its cached w1 part from I-b and solves w2 from everything
    // it heard in Phase I.
    if (m2 == 0) {
        res.decoded2 = BitVector(0);
    } else {
        LinearSystem sys(m2);
        sys.coefficients.reserve_rows(run.diags()[0].eq_rx2 + run.diags()[1].eq_rx2);
        Rng ga = rng.fork(kStreamIa);
        for (size_t t = 0; t < t_a; ++t) {
            const BitVector row = random_vector(m2, ga);
            if (run.got2(t)) sys.add_equation(row, run.sent(t));
        }
        Rng g1 = rng.fork(kStreamIbW1);
        Rng g2 = rng.fork(kStreamIbW2);
        for (size_t t = 0; t < t_b; ++t) {
            const BitVector rowc = random_vector(n12, g1);
            const BitVector row2 = random_vector(m2, g2);
            if (run.got2(t_a + t))
                sys.add_equation(row2, run.sent(t_a + t) ^ dot(rowc, w1c));
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
