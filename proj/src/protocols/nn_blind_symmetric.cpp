// No CSIT and a fully blind encoder on the symmetric channel: one fountain
// over the concatenated 2m message bits, sized so each receiver's joint
// system (its receptions plus its cached bits) closes. The receiver caches
// are drawn inside the runner, after the schedule is fixed, so nothing the
// encoder does can depend on them.

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "becsim/protocols.hpp"
#include "common.hpp"

namespace becsim {

namespace {

enum Stream : uint64_t { kStreamCache = 0, kStreamRows = 1 };

}  // namespace

ProtocolResult run_nn_blind_symmetric(const ProtocolConfig& cfg, const MessagePair& msgs,
                                      const StateTrace& trace, Rng& rng) {
    detail::check_run_inputs(cfg, msgs, "run_nn_blind_symmetric");
    const ChannelParams& p = cfg.params;
    if (p.delta1 != p.delta2 || p.eps1 != p.eps2 || cfg.m1 != cfg.m2)
        throw std::invalid_argument("run_nn_blind_symmetric: needs a symmetric configuration");
    if (p.eps1 <= 0.0)
        throw std::invalid_argument(
            "run_nn_blind_symmetric: eps = 0 means full side information; use separate fountains");
    if (p.delta1 >= 1.0)
        throw std::invalid_argument("run_nn_blind_symmetric: erasure probability 1 never delivers");

    const size_t m = cfg.m1;
    const double delta = p.delta1;
    const double eps = p.eps1;
    const double prx = 1.0 - delta;

    // Each receiver faces m + Bin(m, eps) unknowns and collects Bin(t, 1-d)
    // equations; neither count is visible here, so both variances pad t.
    size_t t = 0;
    if (m > 0) {
        const double nominal = (1.0 + eps) * double(m) / prx;
        const double sigma =
            std::sqrt(double(m) * eps * (1.0 - eps) + nominal * prx * delta);
        t = static_cast<size_t>(std::ceil(nominal)) +
            detail::extra_slots(cfg.slack_coeff, m, detail::margin_rows(cfg.slack_coeff, sigma),
                                prx);
    }

    ProtocolResult res;
    res.plan.phases = {{"I", t, "fixed: joint fountain over both messages"}};

    // Concatenated message vector: w1 on coordinates [0, m), w2 on [m, 2m).
    BitVector joint(2 * m);
    for (size_t i = 0; i < m; ++i) {
        joint.set(i, msgs.w1.get(i));
        joint.set(m + i, msgs.w2.get(i));
    }

    detail::SlotRunner run(trace, cfg.record_transcript, "run_nn_blind_symmetric");
    run.begin_phase("I");
    {
        Rng g = rng.fork(kStreamRows);
        for (size_t s = 0; s < t; ++s) run.step(dot(random_vector(2 * m, g), joint));
    }

    // The caches exist only at the receivers; the encoder above never saw
    // them.
    Rng cache_rng = rng.fork(kStreamCache);
    const CacheAssignment cache = sample_cache(p, m, m, cache_rng);

    std::string note;
    // Receiver i knows the other message's cached bits; everything else of
    // the 2m coordinates is unknown to it.
    const auto decode = [&](bool at_rx1) -> std::optional<BitVector> {
        if (m == 0) return BitVector(0);
        const BitVector& own_cache = at_rx1 ? cache.e1 : cache.e2;
        BitVector unknown(2 * m);
        BitVector known(2 * m);
        for (size_t i = 0; i < m; ++i) {
            const size_t own = at_rx1 ? i : m + i;          // its own message: all unknown
            const size_t other = at_rx1 ? m + i : i;        // the cached one
            unknown.set(own, true);
            if (own_cache.get(i))
                known.set(other, joint.get(other));
            else
                unknown.set(other, true);
        }
        const size_t n_unknown = unknown.count_ones();

        LinearSystem sys(n_unknown);
        sys.coefficients.reserve_rows(at_rx1 ? run.diags()[0].eq_rx1 : run.diags()[0].eq_rx2);
        Rng g = rng.fork(kStreamRows);
        for (size_t s = 0; s < t; ++s) {
            const BitVector row = random_vector(2 * m, g);
            const bool got = at_rx1 ? run.got1(s) : run.got2(s);
            if (got) detail::add_masked_equation(sys, row, unknown, n_unknown, known, run.sent(s));
        }
        auto sol = detail::try_solve(sys, at_rx1 ? "rx1 joint" : "rx2 joint", note);
        if (!sol) return std::nullopt;

        BitVector full = expand_bits(*sol, unknown);
        full.xor_with(known);
        BitVector out(m);
        const size_t base = at_rx1 ? 0 : m;
        for (size_t i = 0; i < m; ++i) out.set(i, full.get(base + i));
        return out;
    };

    res.decoded1 = decode(true);
    res.decoded2 = decode(false);

    res.phases = run.take_diags();
    res.slots_used = run.used();
    res.transcript = run.take_transcript();
    res.failure_note = std::move(note);
    return res;
}

}  // namespace becsim
