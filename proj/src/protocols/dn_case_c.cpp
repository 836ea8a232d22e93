// Delayed state feedback from Rx1 only, encoder sees both cache masks.
// Uncached w1 bits go out plain once; a fixed block of combinations covers
// the w2 bits Rx1 lacks. By then the feedback has told the encoder exactly
// what Rx1 holds: its cached w2 bits plus whichever combinations landed.
// The remaining w1 bits (cached ones, then the plain ones Rx1 missed) ride
// ARQ, each repeat mixed with a fresh combination of those holdings, so
// every delivery to Rx1 strips clean while Rx2 farms the same slots for
// equations. Rx2 first solves Rx1's holdings outright, unit equations from
// the combinations it saw land plus ARQ slots (cached bits strip, overheard
// recycled bits strip, the rest cancel pairwise), then rereads the
// combination block to fill in its own uncached bits.

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "becsim/protocols.hpp"
#include "common.hpp"

namespace becsim {

namespace {

enum Stream : uint64_t { kStreamII = 1, kStreamIII = 2, kStreamIV = 3, kStreamTail = 4 };

}  // namespace

ProtocolResult run_dn_nonblind_case_c(const ProtocolConfig& cfg, const CacheAssignment& cache,
                                      const MessagePair& msgs, const StateTrace& trace,
                                      Rng& rng) {
    detail::check_run_inputs(cfg, msgs, "run_dn_nonblind_case_c");
    detail::check_cache_shape(cfg, cache, "run_dn_nonblind_case_c");
    const ChannelParams& p = cfg.params;
    if ((p.delta1 >= 1.0 && cfg.m1 > 0) || (p.delta2 >= 1.0 && cfg.m2 > 0))
        throw std::invalid_argument("run_dn_nonblind_case_c: erasure probability 1 never delivers");

    const double c = cfg.slack_coeff;
    const size_t m1 = cfg.m1;
    const size_t m2 = cfg.m2;
    const double q2 = 1.0 - p.delta2;
    const double p_cov = 1.0 - p.delta1 * p.delta2;

    const BitVector mask_bu = detail::invert_mask(cache.e1);
    const size_t n_bu = mask_bu.count_ones();
    const size_t n_w = m2 - n_bu;
    const BitVector v = compress_bits(msgs.w2, mask_bu, n_bu);
    const BitVector w_vals = compress_bits(msgs.w2, cache.e1, n_w);

    const std::vector<uint32_t> pos_plain = detail::set_positions(detail::invert_mask(cache.e2));
    const std::vector<uint32_t> pos_arq = detail::set_positions(cache.e2);
    const size_t t1 = pos_plain.size();

    // Fixed combination-block length: nominal covers the uncached w2 bits at
    // the union reception rate, slack pads receiver two's final solve. No
    // feedback from Rx2 exists, so there is no stopping rule to lean on.
    size_t t2 = 0;
    if (n_bu > 0) {
        const size_t nominal = detail::ceil_div_prob(double(n_bu), p_cov);
        const double sigma = std::sqrt(double(nominal) * p_cov * (1.0 - p_cov));
        t2 = nominal + detail::extra_slots(c, m2, detail::margin_rows(c, sigma), p_cov);
    }

    ProtocolResult res;
    res.plan.phases = {
        {"I", t1, "fixed: each w1 bit Rx2 lacks goes out plain once"},
        {"II", t2, "fixed: combinations of the w2 bits Rx1 lacks, nominal plus slack"},
        {"III", std::nullopt,
         "feedback-terminated: repeat each w1 bit Rx2 caches until Rx1's state reads 1, every "
         "repeat mixed with a fresh combination of Rx1's holdings"},
        {"IV", std::nullopt, "feedback-terminated: same treatment for Phase I bits Rx1 missed"},
        {"tail", std::nullopt,
         "sized after Phase IV: expected Rx2 equation shortfall from observed repeats, plus "
         "cushion"},
    };

    detail::SlotRunner run(trace, cfg.record_transcript, "run_dn_nonblind_case_c");

    // Phase I: plain uncached w1 bits; the ones Rx1 misses get recycled.
    std::vector<uint32_t> recycled_bit;
    std::vector<uint32_t> recycled_slot;
    run.begin_phase("I");
    for (const uint32_t j : pos_plain) {
        const size_t t = run.used();
        if (!run.step(msgs.w1.get(j)).first) {
            recycled_bit.push_back(j);
            recycled_slot.push_back(static_cast<uint32_t>(t));
        }
    }

    run.begin_phase("II");
    {
        Rng g = rng.fork(kStreamII);
        for (size_t s = 0; s < t2; ++s) run.step(dot(random_vector(n_bu, g), v));
    }

    // Rx1's holdings after Phase II, as one vector: the combination values
    // its state said landed, then its cached w2 bits. Both ends of the link
    // can reconstruct this layout.
    const size_t base2 = t1;
    const size_t n_u = run.diags()[1].eq_rx1;
    const size_t n_super = n_u + n_w;
    BitVector holdings(n_super);
    {
        size_t ui = 0;
        for (size_t s = 0; s < t2; ++s)
            if (run.got1(base2 + s)) holdings.set(ui++, run.sent(base2 + s));
    }
    detail::paste_bits(holdings, w_vals, n_u);

    run.begin_phase("III");
    {
        Rng g = rng.fork(kStreamIII);
        for (const uint32_t j : pos_arq) {
            for (;;) {
                const bool x = msgs.w1.get(j) ^ dot(random_vector(n_super, g), holdings);
                if (run.step(x).first) break;
            }
        }
    }

    std::vector<uint32_t> repeats(recycled_bit.size(), 0);
    run.begin_phase("IV");
    {
        Rng g = rng.fork(kStreamIV);
        for (size_t i = 0; i < recycled_bit.size(); ++i) {
            for (;;) {
                ++repeats[i];
                const bool x =
                    msgs.w1.get(recycled_bit[i]) ^ dot(random_vector(n_super, g), holdings);
                if (run.step(x).first) break;
            }
        }
    }

    // Tail length from what the feedback exposed: Phase II landings and ARQ
    // repeat counts. Rx2's reception pattern stays hidden, so every term
    // contributes variance to the cushion.
    size_t t_tail = 0;
    if (n_super > 0) {
        double have = double(n_u) * q2 + double(run.diags()[2].slots) * q2;
        double var = (double(n_u) + double(run.diags()[2].slots)) * q2 * p.delta2;
        for (const uint32_t len : repeats) {
            const detail::GroupYield gy = detail::mixed_bit_yield(len, q2, q2);
            have += gy.mean;
            var += gy.var;
        }
        const double shortfall = std::max(0.0, double(n_super) - have);
        const double surplus = std::max(0.0, have - double(n_super));
        const double sigma = std::sqrt(var + shortfall * p.delta2);
        const size_t margin = detail::margin_rows(c, sigma);
        const size_t uncovered = margin > surplus ? margin - static_cast<size_t>(surplus) : 0;
        t_tail = detail::ceil_div_prob(shortfall, q2) +
                 detail::extra_slots(c, m2, uncovered, q2);
    }
    run.begin_phase("tail");
    {
        Rng g = rng.fork(kStreamTail);
        for (size_t s = 0; s < t_tail; ++s) run.step(dot(random_vector(n_super, g), holdings));
    }

    const auto& dg = run.diags();
    const size_t base3 = base2 + t2;
    const size_t base4 = base3 + dg[2].slots;
    const size_t base_tail = base4 + dg[3].slots;

    // Rx1 reads the plain bits it caught, then strips its own holdings from
    // every ARQ delivery; no linear solve is involved.
    BitVector decoded1(m1);
    for (size_t i = 0; i < t1; ++i)
        if (run.got1(i)) decoded1.set(pos_plain[i], run.sent(i));
    const auto read_arq = [&](uint64_t stream, size_t base, const std::vector<uint32_t>& bits) {
        Rng g = rng.fork(stream);
        size_t t = base;
        for (const uint32_t j : bits) {
            for (;;) {
                const BitVector row = random_vector(n_super, g);
                const bool s1 = run.got1(t);
                const bool x = run.sent(t);
                ++t;
                if (s1) {
                    decoded1.set(j, x ^ dot(row, holdings));
                    break;
                }
            }
        }
    };
    read_arq(kStreamIII, base3, pos_arq);
    read_arq(kStreamIV, base4, recycled_bit);

    std::string note;

    // Rx2 stage one: solve Rx1's holdings. Unit equations where it saw a
    // Phase II combination land, stripped ARQ slots everywhere its cache or
    // a Phase I overhear pins the bit, pairwise cancellations otherwise.
    std::optional<BitVector> super_hat;
    if (n_super == 0) {
        super_hat = BitVector(0);
    } else {
        LinearSystem sys(n_super);
        sys.coefficients.reserve_rows(dg[1].eq_rx2 + dg[2].eq_rx2 + dg[3].eq_rx2 + dg[4].eq_rx2);
        {
            size_t ui = 0;
            for (size_t s = 0; s < t2; ++s) {
                if (!run.got1(base2 + s)) continue;
                if (run.got2(base2 + s)) sys.add_unit_equation(ui, run.sent(base2 + s));
                ++ui;
            }
        }
        {
            Rng g = rng.fork(kStreamIII);
            size_t t = base3;
            for (const uint32_t j : pos_arq) {
                for (;;) {
                    const BitVector row = random_vector(n_super, g);
                    const bool s1 = run.got1(t);
                    if (run.got2(t)) sys.add_equation(row, run.sent(t) ^ msgs.w1.get(j));
                    ++t;
                    if (s1) break;
                }
            }
        }
        {
            Rng g = rng.fork(kStreamIV);
            size_t t = base4;
            for (size_t i = 0; i < recycled_bit.size(); ++i) {
                const bool overheard = run.got2(recycled_slot[i]);
                const bool aj = overheard && run.sent(recycled_slot[i]);
                bool have_prev = false;
                BitVector prev_row(0);
                bool prev_y = false;
                for (;;) {
                    BitVector row = random_vector(n_super, g);
                    const bool s1 = run.got1(t);
                    if (run.got2(t)) {
                        const bool y = run.sent(t);
                        if (overheard) {
                            sys.add_equation(row, y ^ aj);
                        } else if (have_prev) {
                            BitVector diff = row;
                            diff.xor_with(prev_row);
                            sys.add_equation(diff, y ^ prev_y);
                            prev_row = std::move(row);
                            prev_y = y;
                        } else {
                            have_prev = true;
                            prev_row = std::move(row);
                            prev_y = y;
                        }
                    }
                    ++t;
                    if (s1) break;
                }
            }
        }
        {
            Rng g = rng.fork(kStreamTail);
            for (size_t s = 0; s < t_tail; ++s) {
                const BitVector row = random_vector(n_super, g);
                if (run.got2(base_tail + s)) sys.add_equation(row, run.sent(base_tail + s));
            }
        }
        super_hat = detail::try_solve(sys, "rx2 holdings", note);
    }

    // Rx2 stage two: with the holdings pinned, every Phase II slot that
    // landed at either receiver becomes an equation in its uncached bits.
    std::optional<BitVector> decoded2;
    if (m2 == 0) {
        decoded2 = BitVector(0);
    } else if (super_hat) {
        BitVector w_mask(n_super);
        detail::paste_bits(w_mask, detail::invert_mask(BitVector(n_w)), n_u);
        const BitVector w_part = compress_bits(*super_hat, w_mask, n_w);
        if (n_bu == 0) {
            decoded2 = expand_bits(w_part, cache.e1);
        } else {
            LinearSystem sys(n_bu);
            sys.coefficients.reserve_rows(dg[1].eq_rx1 + dg[1].eq_rx2);
            Rng g = rng.fork(kStreamII);
            size_t ui = 0;
            for (size_t s = 0; s < t2; ++s) {
                const BitVector row = random_vector(n_bu, g);
                if (run.got1(base2 + s))
                    sys.add_equation(row, super_hat->get(ui++));
                else if (run.got2(base2 + s))
                    sys.add_equation(row, run.sent(base2 + s));
            }
            auto v_hat = detail::try_solve(sys, "rx2 fresh bits", note);
            if (v_hat) {
                BitVector w2r = expand_bits(*v_hat, mask_bu);
                w2r.xor_with(expand_bits(w_part, cache.e1));
                decoded2 = std::move(w2r);
            }
        }
    }

    res.decoded1 = std::move(decoded1);
    res.decoded2 = std::move(decoded2);
    res.phases = run.take_diags();
    res.slots_used = run.used();
    res.transcript = run.take_transcript();
    res.failure_note = std::move(note);
    return res;
}

}  // namespace becsim
