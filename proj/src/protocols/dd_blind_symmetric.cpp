// Blind encoder on the symmetric channel with delayed state feedback from
// both receivers. Phase I repeats each xor a_j ^ b_j until one receiver
// takes it, so afterwards the feedback says exactly which positions each
// receiver holds. Fountains over those positions then close two kinds of
// debt per receiver: partner bits that unlock held xors (the cache already
// covers a 1-eps share of them) and message bits for positions it missed
// outright. Cache-rich channels (eps <= delta) settle the first debt on its
// own, then a paired fountain clears both leftovers at once; cache-poor
// ones fold receiver one's debts into a single joint system instead, fed by
// message-one combinations that double as partner-bit equations wherever an
// xor substitutes for the message bit.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "becsim/protocols.hpp"
#include "common.hpp"

namespace becsim {

namespace {

enum Stream : uint64_t { kStreamCache = 0, kStreamII = 1, kStreamIII = 2, kStreamIV = 3 };

// Reception count a decode site must reach before its phase may stop.
size_t quota(double c, double count, double sigma) {
    if (count <= 0.0 && sigma <= 0.0) return 0;
    return static_cast<size_t>(std::ceil(count)) + becsim::detail::margin_rows(c, sigma);
}

}  // namespace

ProtocolResult run_dd_blind_symmetric(const ProtocolConfig& cfg, const MessagePair& msgs,
                                      const StateTrace& trace, Rng& rng) {
    detail::check_run_inputs(cfg, msgs, "run_dd_blind_symmetric");
    const ChannelParams& p = cfg.params;
    if (p.delta1 != p.delta2 || p.eps1 != p.eps2 || cfg.m1 != cfg.m2)
        throw std::invalid_argument("run_dd_blind_symmetric: needs a symmetric configuration");
    if (p.delta1 >= 1.0)
        throw std::invalid_argument("run_dd_blind_symmetric: erasure probability 1 never delivers");

    const size_t m = cfg.m1;
    const double delta = p.delta1;
    const double eps = p.eps1;
    const double cc = cfg.slack_coeff;
    const bool cache_rich = eps <= delta;

    // Message xors go out in Phase I; positions split by who took them.
    BitVector cx = msgs.w1;
    cx.xor_with(msgs.w2);

    detail::SlotRunner run(trace, cfg.record_transcript, "run_dd_blind_symmetric");
    run.begin_phase("I");
    BitVector r1(m);
    BitVector r2(m);
    for (size_t j = 0; j < m; ++j) {
        for (;;) {
            const auto [s1, s2] = run.step(cx.get(j));
            if (s1 || s2) {
                if (s1) r1.set(j, true);
                if (s2) r2.set(j, true);
                break;
            }
        }
    }

    const size_t n_r1 = r1.count_ones();
    const size_t n_r2 = r2.count_ones();
    const size_t n_not1 = m - n_r1;
    const size_t n_not2 = m - n_r2;
    const size_t n_r1only = detail::masked_values(r1, detail::invert_mask(r2)).count_ones();

    // Fountain alphabets: partner bits at the positions each receiver holds.
    const BitVector bt = compress_bits(msgs.w2, r1, n_r1);
    const BitVector at = compress_bits(msgs.w1, r2, n_r2);

    // The uncached share of each alphabet is binomial; quotas pad for it.
    const double sig_b1 = std::sqrt(double(n_r1) * eps * (1.0 - eps));
    const double sig_a2 = std::sqrt(double(n_r2) * eps * (1.0 - eps));
    const double sig_only = std::sqrt(double(n_r1only) * eps * (1.0 - eps));

    // Phase II: message-two combinations. Cache-rich: receiver one only needs
    // its uncached partner bits. Cache-poor: receiver one's joint system
    // still needs these rows for partner bits at positions receiver two never
    // held (no xor substitutes there), and receiver two drains its leftover
    // positions from the same stream.
    run.begin_phase("II");
    {
        Rng g = rng.fork(kStreamII);
        const size_t q1 = cache_rich ? quota(cc, eps * double(n_r1), sig_b1)
                                     : quota(cc, eps * double(n_r1only), sig_only);
        const size_t q2 = cache_rich ? 0 : quota(cc, double(n_not2), 0.0);
        size_t n1 = 0;
        size_t n2 = 0;
        while (n1 < q1 || n2 < q2) {
            const auto [s1, s2] = run.step(dot(random_vector(n_r1, g), bt));
            n1 += s1;
            n2 += s2;
        }
    }

    // Phase III: message-one combinations for receiver two's uncached share.
    run.begin_phase("III");
    {
        Rng g = rng.fork(kStreamIII);
        const size_t q = quota(cc, eps * double(n_r2), sig_a2);
        size_t n2 = 0;
        while (n2 < q) n2 += run.step(dot(random_vector(n_r2, g), at)).second;
    }

    const size_t nII_1 = run.diags()[1].eq_rx1;
    const size_t nII_2 = run.diags()[1].eq_rx2;
    const size_t nIII_1 = run.diags()[2].eq_rx1;

    // Phase IV closes whatever the first two fountains left open.
    run.begin_phase("IV");
    if (cache_rich) {
        // Paired combinations serve both receivers' missed positions at once.
        Rng g = rng.fork(kStreamIV);
        const size_t q1 = quota(cc, double(n_not1), 0.0);
        const size_t q2 = quota(cc, double(n_not2), 0.0);
        size_t n1 = nIII_1;
        size_t n2 = nII_2;
        while (n1 < q1 || n2 < q2) {
            const BitVector ra = random_vector(n_r2, g);
            const BitVector rb = random_vector(n_r1, g);
            const auto [s1, s2] = run.step(dot(ra, at) ^ dot(rb, bt));
            n1 += s1;
            n2 += s2;
        }
    } else {
        // More message-one combinations until receiver one's joint system is
        // covered: missed positions plus uncached partner bits, minus what
        // Phase II rows can still contribute (their rank tops out at the
        // partner-bit count, so the surplus is discounted).
        Rng g = rng.fork(kStreamIV);
        const size_t q_missed = quota(cc, double(n_not1), 0.0);
        const size_t q_joint = quota(cc, double(n_not1) + eps * double(n_r1), sig_b1);
        const double cap = std::floor(eps * double(n_r1) -
                                      std::min(cc, 1.0) * detail::kSigmaZ * sig_b1);
        const size_t ii_eff = std::min(nII_1, cap > 0.0 ? static_cast<size_t>(cap) : 0);
        size_t n1 = 0;
        while (nIII_1 + n1 < q_missed || ii_eff + nIII_1 + n1 < q_joint)
            n1 += run.step(dot(random_vector(n_r2, g), at)).first;
    }

    ProtocolResult res;
    res.plan.phases = {
        {"I", std::nullopt, "feedback-terminated: repeat each xor until either receiver takes it"},
        {"II", std::nullopt,
         "adaptive: message-two combinations over receiver-one's xors, reception quotas decide"},
        {"III", std::nullopt,
         "adaptive: message-one combinations over receiver-two's xors, reception quotas decide"},
        {"IV", std::nullopt,
         cache_rich
             ? "adaptive: paired combinations until both receivers' leftover quotas close"
             : "adaptive: further message-one combinations until receiver one's joint quota "
               "closes"},
    };

    // Caches are sampled only now: the schedule above never saw them.
    Rng cache_rng = rng.fork(kStreamCache);
    const CacheAssignment cache = sample_cache(p, m, m, cache_rng);

    const auto& dg = run.diags();
    const size_t base2 = dg[0].slots;
    const size_t base3 = base2 + dg[1].slots;
    const size_t base4 = base3 + dg[2].slots;
    const size_t len2 = dg[1].slots;
    const size_t len3 = dg[2].slots;
    const size_t len4 = dg[3].slots;

    std::string note;

    // Cache-rich decode, same shape at both receivers: first solve the
    // uncached partner bits from this receiver's own fountain, which unlocks
    // every held xor, then collect the missed positions from the other
    // fountain plus the paired phase.
    const auto decode_split = [&](bool at_rx1) -> std::optional<BitVector> {
        if (m == 0) return BitVector(0);
        const BitVector& held = at_rx1 ? r1 : r2;
        const BitVector& oheld = at_rx1 ? r2 : r1;
        const BitVector& cmask = at_rx1 ? cache.e1 : cache.e2;
        const BitVector& pmsg = at_rx1 ? msgs.w2 : msgs.w1;
        const size_t n_held = at_rx1 ? n_r1 : n_r2;
        const size_t n_oheld = at_rx1 ? n_r2 : n_r1;
        const size_t base_a = at_rx1 ? base2 : base3;
        const size_t len_a = at_rx1 ? len2 : len3;
        const size_t base_b = at_rx1 ? base3 : base2;
        const size_t len_b = at_rx1 ? len3 : len2;
        const auto got = [&](size_t t) { return at_rx1 ? run.got1(t) : run.got2(t); };

        // Partner bits on held positions: cached ones are known, the rest
        // come out of this receiver's fountain.
        const BitVector unk_a = detail::masked_values(held, detail::invert_mask(cmask));
        const size_t n_unk_a = unk_a.count_ones();
        BitVector partner_on_held = detail::masked_values(pmsg, detail::masked_values(held, cmask));
        if (n_unk_a > 0) {
            LinearSystem sys(n_unk_a);
            sys.coefficients.reserve_rows(at_rx1 ? dg[1].eq_rx1 : dg[2].eq_rx2);
            Rng g = rng.fork(at_rx1 ? kStreamII : kStreamIII);
            for (size_t t = 0; t < len_a; ++t) {
                const BitVector row = random_vector(n_held, g);
                if (!got(base_a + t)) continue;
                detail::add_masked_equation(sys, expand_bits(row, held), unk_a, n_unk_a,
                                            partner_on_held, run.sent(base_a + t));
            }
            auto sol = detail::try_solve(sys, at_rx1 ? "rx1 partner bits" : "rx2 partner bits",
                                         note);
            if (!sol) return std::nullopt;
            partner_on_held.xor_with(expand_bits(*sol, unk_a));
        }
        BitVector own = detail::masked_values(cx, held);
        own.xor_with(partner_on_held);

        // Missed positions: the other fountain's rows restricted to them,
        // plus paired rows with the partner half stripped.
        const BitVector unk_b = detail::invert_mask(held);
        const size_t n_unk_b = m - n_held;
        if (n_unk_b > 0) {
            LinearSystem sys(n_unk_b);
            sys.coefficients.reserve_rows((at_rx1 ? dg[2].eq_rx1 + dg[3].eq_rx1
                                                  : dg[1].eq_rx2 + dg[3].eq_rx2));
            Rng gb = rng.fork(at_rx1 ? kStreamIII : kStreamII);
            for (size_t t = 0; t < len_b; ++t) {
                const BitVector row = random_vector(n_oheld, gb);
                if (!got(base_b + t)) continue;
                detail::add_masked_equation(sys, expand_bits(row, oheld), unk_b, n_unk_b, own,
                                            run.sent(base_b + t));
            }
            Rng g4 = rng.fork(kStreamIV);
            for (size_t t = 0; t < len4; ++t) {
                const BitVector ra = random_vector(n_r2, g4);
                const BitVector rb = random_vector(n_r1, g4);
                if (!got(base4 + t)) continue;
                const BitVector& mine = at_rx1 ? ra : rb;
                const BitVector& strip = at_rx1 ? rb : ra;
                const bool y = run.sent(base4 + t) ^ dot(expand_bits(strip, held), partner_on_held);
                detail::add_masked_equation(sys, expand_bits(mine, oheld), unk_b, n_unk_b, own, y);
            }
            auto sol = detail::try_solve(sys, at_rx1 ? "rx1 missed bits" : "rx2 missed bits",
                                         note);
            if (!sol) return std::nullopt;
            own.xor_with(expand_bits(*sol, unk_b));
        }
        return own;
    };

    // Cache-poor decode at receiver one: one system over its missed message
    // bits and uncached partner bits together, laid out as message one on
    // [0, m) and message two on [m, 2m). A message-one combination touching
    // a held position j turns into a partner-bit coefficient there, since
    // a_j = c_j ^ b_j with c_j in hand.
    const auto decode_joint_rx1 = [&]() -> std::optional<BitVector> {
        if (m == 0) return BitVector(0);
        const BitVector not_r1 = detail::invert_mask(r1);
        const BitVector unk_b = detail::masked_values(r1, detail::invert_mask(cache.e1));
        const size_t n_unk = n_not1 + unk_b.count_ones();
        BitVector unknown(2 * m);
        detail::paste_bits(unknown, not_r1, 0);
        detail::paste_bits(unknown, unk_b, m);
        BitVector known(2 * m);
        detail::paste_bits(
            known, detail::masked_values(msgs.w2, detail::masked_values(r1, cache.e1)), m);
        const BitVector c_on_r1 = detail::masked_values(cx, r1);

        LinearSystem sys(n_unk);
        sys.coefficients.reserve_rows(dg[1].eq_rx1 + dg[2].eq_rx1 + dg[3].eq_rx1);
        {
            Rng g = rng.fork(kStreamII);
            for (size_t t = 0; t < len2; ++t) {
                const BitVector row = random_vector(n_r1, g);
                if (!run.got1(base2 + t)) continue;
                BitVector full(2 * m);
                detail::paste_bits(full, expand_bits(row, r1), m);
                detail::add_masked_equation(sys, full, unknown, n_unk, known,
                                            run.sent(base2 + t));
            }
        }
        const auto add_a_rows = [&](uint64_t stream, size_t base, size_t len) {
            Rng g = rng.fork(stream);
            for (size_t t = 0; t < len; ++t) {
                const BitVector row = random_vector(n_r2, g);
                if (!run.got1(base + t)) continue;
                const BitVector row_g = expand_bits(row, r2);
                const BitVector substituted = detail::masked_values(row_g, r1);
                BitVector full(2 * m);
                detail::paste_bits(full, detail::masked_values(row_g, not_r1), 0);
                detail::paste_bits(full, substituted, m);
                const bool y = run.sent(base + t) ^ dot(substituted, c_on_r1);
                detail::add_masked_equation(sys, full, unknown, n_unk, known, y);
            }
        };
        add_a_rows(kStreamIII, base3, len3);
        add_a_rows(kStreamIV, base4, len4);

        auto sol = detail::try_solve(sys, "rx1 joint", note);
        if (!sol) return std::nullopt;
        BitVector full = expand_bits(*sol, unknown);
        full.xor_with(known);
        BitVector lowmask(2 * m);
        detail::paste_bits(lowmask, detail::invert_mask(BitVector(m)), 0);
        BitVector own = compress_bits(full, lowmask, m);
        const BitVector partner_on_r1 = compress_bits(full, detail::invert_mask(lowmask), m);
        own.xor_with(c_on_r1);
        own.xor_with(partner_on_r1);
        return own;
    };

    // Cache-poor decode at receiver two keeps the staged shape: uncached
    // message-one bits from phases III and IV, which unlock its held xors,
    // then leftover positions from the message-two fountain.
    const auto decode_staged_rx2 = [&]() -> std::optional<BitVector> {
        if (m == 0) return BitVector(0);
        const BitVector unk_a = detail::masked_values(r2, detail::invert_mask(cache.e2));
        const size_t n_unk_a = unk_a.count_ones();
        BitVector a_on_r2 = detail::masked_values(msgs.w1, detail::masked_values(r2, cache.e2));
        if (n_unk_a > 0) {
            LinearSystem sys(n_unk_a);
            sys.coefficients.reserve_rows(dg[2].eq_rx2 + dg[3].eq_rx2);
            const auto add_rows = [&](uint64_t stream, size_t base, size_t len) {
                Rng g = rng.fork(stream);
                for (size_t t = 0; t < len; ++t) {
                    const BitVector row = random_vector(n_r2, g);
                    if (!run.got2(base + t)) continue;
                    detail::add_masked_equation(sys, expand_bits(row, r2), unk_a, n_unk_a,
                                                a_on_r2, run.sent(base + t));
                }
            };
            add_rows(kStreamIII, base3, len3);
            add_rows(kStreamIV, base4, len4);
            auto sol = detail::try_solve(sys, "rx2 partner bits", note);
            if (!sol) return std::nullopt;
            a_on_r2.xor_with(expand_bits(*sol, unk_a));
        }
        BitVector own = detail::masked_values(cx, r2);
        own.xor_with(a_on_r2);

        const BitVector unk_c = detail::invert_mask(r2);
        if (n_not2 > 0) {
            LinearSystem sys(n_not2);
            sys.coefficients.reserve_rows(dg[1].eq_rx2);
            Rng g = rng.fork(kStreamII);
            for (size_t t = 0; t < len2; ++t) {
                const BitVector row = random_vector(n_r1, g);
                if (!run.got2(base2 + t)) continue;
                detail::add_masked_equation(sys, expand_bits(row, r1), unk_c, n_not2, own,
                                            run.sent(base2 + t));
            }
            auto sol = detail::try_solve(sys, "rx2 missed bits", note);
            if (!sol) return std::nullopt;
            own.xor_with(expand_bits(*sol, unk_c));
        }
        return own;
    };

    res.decoded1 = cache_rich ? decode_split(true) : decode_joint_rx1();
    res.decoded2 = cache_rich ? decode_split(false) : decode_staged_rx2();

    res.phases = run.take_diags();
    res.slots_used = run.used();
    res.transcript = run.take_transcript();
    res.failure_note = std::move(note);
    return res;
}

}  // namespace becsim
