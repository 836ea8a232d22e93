#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "becsim/channel.hpp"
#include "becsim/gf2.hpp"
#include "becsim/protocols.hpp"
#include "becsim/rng.hpp"
#include "doctest.h"

using becsim::BitVector;
using becsim::CacheAssignment;
using becsim::ChannelParams;
using becsim::MessagePair;
using becsim::ProtocolConfig;
using becsim::ProtocolResult;
using becsim::Rng;
using becsim::StateTrace;

namespace {

// Everything one protocol run consumes, drawn from independent streams of a
// single master seed the way the simulation driver does.
struct TrialInputs {
    StateTrace trace;
    CacheAssignment cache;
    MessagePair msgs;
    Rng run_rng;
};

TrialInputs draw_trial(const ChannelParams& p, size_t m1, size_t m2, size_t trace_slots,
                       uint64_t seed) {
    Rng master(seed);
    Rng state_rng = master.fork(1);
    Rng cache_rng = master.fork(2);
    Rng msg_rng = master.fork(3);
    return TrialInputs{
        becsim::sample_states(p, trace_slots, state_rng),
        becsim::sample_cache(p, m1, m2, cache_rng),
        MessagePair{becsim::random_vector(m1, msg_rng), becsim::random_vector(m2, msg_rng)},
        master.fork(4),
    };
}

// Generous slot budget: every protocol here finishes well under three times
// the naive one-message-per-good-slot bound.
size_t budget(const ChannelParams& p, size_t m1, size_t m2) {
    const double pmin = std::min(1.0 - p.delta1, 1.0 - p.delta2);
    return static_cast<size_t>(3.0 * (double(m1 + m2) + 512.0) / pmin) + 512;
}

// Checks the bookkeeping every runner promises: slot totals add up, phase
// ids match the plan, reception counts fit inside phase lengths, and any
// decoded message is exactly the transmitted one.
void check_result_shape(const ProtocolResult& r, const MessagePair& msgs) {
    REQUIRE(r.phases.size() == r.plan.phases.size());
    size_t total = 0;
    for (size_t i = 0; i < r.phases.size(); ++i) {
        CHECK(r.phases[i].id == r.plan.phases[i].id);
        CHECK(r.phases[i].eq_rx1 <= r.phases[i].slots);
        CHECK(r.phases[i].eq_rx2 <= r.phases[i].slots);
        if (r.plan.phases[i].planned_slots)
            CHECK(r.phases[i].slots == *r.plan.phases[i].planned_slots);
        total += r.phases[i].slots;
    }
    CHECK(r.slots_used == total);
    if (r.decoded1) CHECK(*r.decoded1 == msgs.w1);
    if (r.decoded2) CHECK(*r.decoded2 == msgs.w2);
    CHECK(r.success() == r.failure_note.empty());
}

struct RatePair {
    double r1 = 0.0;
    double r2 = 0.0;
};

}  // namespace

TEST_CASE("semi-blind no-CSIT runner approaches its corner point") {
    // delta1 = 1/3, delta2 = 1/2, eps1 = 2/3, eps2 = 1/6; message lengths at
    // the corner ratio m1 = (4/5) m2 drive the rate pair toward (4/11, 5/11).
    const ChannelParams p{1.0 / 3.0, 0.5, 2.0 / 3.0, 1.0 / 6.0};
    const size_t m2 = 4000;
    const size_t m1 = 3200;

    double sum1 = 0.0, sum2 = 0.0;
    const int trials = 8;
    for (int i = 0; i < trials; ++i) {
        TrialInputs in = draw_trial(p, m1, m2, budget(p, m1, m2), 900 + i);
        const ProtocolConfig cfg{p, m1, m2, 3.0, 900u + i, false};
        const ProtocolResult r =
            becsim::run_nn_semiblind(cfg, in.cache, in.msgs, in.trace, in.run_rng);
        check_result_shape(r, in.msgs);
        REQUIRE(r.success());
        sum1 += double(m1) / double(r.slots_used);
        sum2 += double(m2) / double(r.slots_used);
    }
    // At m2 = 4000 the cushions cost a few percent; they shrink like m^{-1/3}.
    CHECK(sum1 / trials == doctest::Approx(4.0 / 11.0).epsilon(0.08));
    CHECK(sum2 / trials == doctest::Approx(5.0 / 11.0).epsilon(0.08));

    // One larger run to see the gap tighten.
    {
        TrialInputs in = draw_trial(p, 9600, 12000, budget(p, 9600, 12000), 77);
        const ProtocolConfig cfg{p, 9600, 12000, 3.0, 77, false};
        const ProtocolResult r =
            becsim::run_nn_semiblind(cfg, in.cache, in.msgs, in.trace, in.run_rng);
        REQUIRE(r.success());
        const double gap_small = 4.0 / 11.0 - sum1 / trials;
        const double gap_large = 4.0 / 11.0 - double(9600) / double(r.slots_used);
        CHECK(gap_large > 0.0);
        CHECK(gap_large < gap_small);
    }
}

TEST_CASE("semi-blind runner with eps2 = 0 reduces to the single-phase scheme") {
    // Everything of w1 is cached at Rx2, so Phase II disappears and the run
    // spends exactly Phase I. Expected rates ((1-d1) - e1(1-d2), 1-d2).
    const ChannelParams p{0.25, 0.5, 0.5, 0.0};
    const size_t m1 = 4000, m2 = 4000;  // corner ratio is 1 here

    double sum1 = 0.0, sum2 = 0.0;
    const int trials = 6;
    for (int i = 0; i < trials; ++i) {
        TrialInputs in = draw_trial(p, m1, m2, budget(p, m1, m2), 1800 + i);
        const ProtocolConfig cfg{p, m1, m2, 3.0, 1800u + i, false};
        const ProtocolResult r =
            becsim::run_nn_semiblind(cfg, in.cache, in.msgs, in.trace, in.run_rng);
        check_result_shape(r, in.msgs);
        REQUIRE(r.success());
        CHECK(r.phases.back().id == "II");
        CHECK(r.phases.back().slots == 0);
        sum1 += double(m1) / double(r.slots_used);
        sum2 += double(m2) / double(r.slots_used);
    }
    CHECK(sum1 / trials == doctest::Approx(0.5).epsilon(0.08));
    CHECK(sum2 / trials == doctest::Approx(0.5).epsilon(0.08));
}

TEST_CASE("semi-blind runner with no caches and m1 = 0 is a plain fountain to Rx2") {
    const ChannelParams p{0.5, 0.5, 1.0, 1.0};
    const size_t m2 = 4000;
    double sum2 = 0.0;
    const int trials = 6;
    for (int i = 0; i < trials; ++i) {
        TrialInputs in = draw_trial(p, 0, m2, budget(p, 0, m2), 2700 + i);
        const ProtocolConfig cfg{p, 0, m2, 3.0, 2700u + i, false};
        const ProtocolResult r =
            becsim::run_nn_semiblind(cfg, in.cache, in.msgs, in.trace, in.run_rng);
        check_result_shape(r, in.msgs);
        REQUIRE(r.success());
        CHECK(r.decoded1->size() == 0);
        sum2 += double(m2) / double(r.slots_used);
    }
    CHECK(sum2 / trials == doctest::Approx(0.5).epsilon(0.06));
}

TEST_CASE("semi-blind runner is deterministic and ignores Rx1's cache when encoding") {
    const ChannelParams p{1.0 / 3.0, 0.5, 2.0 / 3.0, 1.0 / 6.0};
    const size_t m1 = 800, m2 = 1000;
    TrialInputs in = draw_trial(p, m1, m2, budget(p, m1, m2), 41);
    ProtocolConfig cfg{p, m1, m2, 3.0, 41, true};

    Rng r1 = in.run_rng;
    Rng r2 = in.run_rng;
    const ProtocolResult a = becsim::run_nn_semiblind(cfg, in.cache, in.msgs, in.trace, r1);
    const ProtocolResult b = becsim::run_nn_semiblind(cfg, in.cache, in.msgs, in.trace, r2);
    REQUIRE(a.transcript.has_value());
    REQUIRE(b.transcript.has_value());
    CHECK(becsim::to_json(*a.transcript) == becsim::to_json(*b.transcript));
    CHECK(a.slots_used == b.slots_used);

    // Same run with a different e1: the schedule and every transmitted
    // symbol must be identical, because the encoder never sees e1.
    CacheAssignment other = in.cache;
    Rng flip(5);
    other.e1 = becsim::random_vector(m2, flip);
    Rng r3 = in.run_rng;
    const ProtocolResult c2 = becsim::run_nn_semiblind(cfg, other, in.msgs, in.trace, r3);
    CHECK(becsim::to_json(*c2.transcript) == becsim::to_json(*a.transcript));
}

TEST_CASE("semi-blind runner rejects bad configurations") {
    const size_t m1 = 10, m2 = 10;
    Rng rng(1);
    StateTrace tr = becsim::sample_states(ChannelParams{0.2, 0.4, 0.5, 0.5}, 512, rng);
    CacheAssignment cache{BitVector(m2), BitVector(m1)};
    MessagePair msgs{BitVector(m1), BitVector(m2)};

    // delta ordering, degenerate erasure, mismatched shapes.
    CHECK_THROWS_AS(becsim::run_nn_semiblind(ProtocolConfig{{0.5, 0.4, 0.5, 0.5}, m1, m2},
                                             cache, msgs, tr, rng),
                    std::invalid_argument);
    CHECK_THROWS_AS(becsim::run_nn_semiblind(ProtocolConfig{{0.2, 1.0, 0.5, 0.5}, m1, m2},
                                             cache, msgs, tr, rng),
                    std::invalid_argument);
    CHECK_THROWS_AS(becsim::run_nn_semiblind(ProtocolConfig{{0.2, 0.4, 0.5, 0.5}, m1 + 1, m2},
                                             cache, msgs, tr, rng),
                    std::invalid_argument);
    CHECK_THROWS_AS(becsim::run_nn_semiblind(
                        ProtocolConfig{{0.2, 0.4, 0.5, 0.5}, m1, m2, -1.0}, cache, msgs, tr, rng),
                    std::invalid_argument);
    CacheAssignment bad{BitVector(m2 + 1), BitVector(m1)};
    CHECK_THROWS_AS(becsim::run_nn_semiblind(ProtocolConfig{{0.2, 0.4, 0.5, 0.5}, m1, m2}, bad,
                                             msgs, tr, rng),
                    std::invalid_argument);

    // A trace too short for the schedule is a harness bug, reported as such.
    StateTrace tiny = becsim::sample_states(ChannelParams{0.2, 0.4, 0.5, 0.5}, 3, rng);
    CHECK_THROWS_AS(becsim::run_nn_semiblind(ProtocolConfig{{0.2, 0.4, 0.5, 0.5}, m1, m2},
                                             cache, msgs, tiny, rng),
                    std::length_error);
}

TEST_CASE("blind symmetric runner approaches (1-d)/(1+e) per user") {
    const ChannelParams p{0.5, 0.5, 0.5, 0.5};
    const size_t m = 2000;
    double sum1 = 0.0, sum2 = 0.0;
    const int trials = 6;
    for (int i = 0; i < trials; ++i) {
        TrialInputs in = draw_trial(p, m, m, budget(p, m, m), 3600 + i);
        const ProtocolConfig cfg{p, m, m, 3.0, 3600u + i, false};
        const ProtocolResult r = becsim::run_nn_blind_symmetric(cfg, in.msgs, in.trace, in.run_rng);
        check_result_shape(r, in.msgs);
        REQUIRE(r.success());
        sum1 += double(m) / double(r.slots_used);
        sum2 += double(m) / double(r.slots_used);
    }
    CHECK(sum1 / trials == doctest::Approx(1.0 / 3.0).epsilon(0.08));
    CHECK(sum2 / trials == doctest::Approx(1.0 / 3.0).epsilon(0.08));
}

TEST_CASE("blind symmetric runner with no caches halves the fountain rate") {
    const ChannelParams p{0.5, 0.5, 1.0, 1.0};
    const size_t m = 2000;
    double sum = 0.0;
    const int trials = 6;
    for (int i = 0; i < trials; ++i) {
        TrialInputs in = draw_trial(p, m, m, budget(p, m, m), 4500 + i);
        const ProtocolConfig cfg{p, m, m, 3.0, 4500u + i, false};
        const ProtocolResult r = becsim::run_nn_blind_symmetric(cfg, in.msgs, in.trace, in.run_rng);
        check_result_shape(r, in.msgs);
        REQUIRE(r.success());
        sum += double(m) / double(r.slots_used);
    }
    CHECK(sum / trials == doctest::Approx(0.25).epsilon(0.08));
}

TEST_CASE("blind symmetric runner rejects asymmetric or trivial configurations") {
    Rng rng(1);
    StateTrace tr = becsim::sample_states(ChannelParams{0.5, 0.5, 0.5, 0.5}, 64, rng);
    MessagePair msgs{BitVector(4), BitVector(4)};
    CHECK_THROWS_AS(becsim::run_nn_blind_symmetric(ProtocolConfig{{0.4, 0.5, 0.5, 0.5}, 4, 4},
                                                   msgs, tr, rng),
                    std::invalid_argument);
    CHECK_THROWS_AS(becsim::run_nn_blind_symmetric(ProtocolConfig{{0.5, 0.5, 0.5, 0.6}, 4, 4},
                                                   msgs, tr, rng),
                    std::invalid_argument);
    CHECK_THROWS_AS(becsim::run_nn_blind_symmetric(ProtocolConfig{{0.5, 0.5, 0.0, 0.0}, 4, 4},
                                                   msgs, tr, rng),
                    std::invalid_argument);
    MessagePair uneven{BitVector(4), BitVector(6)};
    CHECK_THROWS_AS(becsim::run_nn_blind_symmetric(ProtocolConfig{{0.5, 0.5, 0.5, 0.5}, 4, 6},
                                                   uneven, tr, rng),
                    std::invalid_argument);
}

TEST_CASE("blind inner runner approaches (1-d1, (1-e2)(1-d1)(1-d2))") {
    // eta = 1/((1-e2)(1-d2)) = 4, so m1 = 4 m2 targets the corner.
    const ChannelParams p{0.25, 0.5, 0.0, 0.5};
    const size_t m2 = 1000, m1 = 4000;
    double sum1 = 0.0, sum2 = 0.0;
    const int trials = 6;
    for (int i = 0; i < trials; ++i) {
        TrialInputs in = draw_trial(p, m1, m2, budget(p, m1, m2), 5400 + i);
        const ProtocolConfig cfg{p, m1, m2, 3.0, 5400u + i, false};
        const ProtocolResult r = becsim::run_nn_blind_inner(cfg, in.msgs, in.trace, in.run_rng);
        check_result_shape(r, in.msgs);
        REQUIRE(r.success());
        sum1 += double(m1) / double(r.slots_used);
        sum2 += double(m2) / double(r.slots_used);
    }
    CHECK(sum1 / trials == doctest::Approx(0.75).epsilon(0.12));
    CHECK(sum2 / trials == doctest::Approx(0.1875).epsilon(0.12));
}

TEST_CASE("blind inner runner with a clean downlink matches the outer bound") {
    // delta1 = 0: Rx1 reads every Phase-I bit, Phase II is empty, and the
    // rate pair lands on (1, (1-e2)(1-d2)) up to the tail.
    const ChannelParams p{0.0, 0.5, 0.0, 0.5};
    const size_t m2 = 1000, m1 = 4000;
    TrialInputs in = draw_trial(p, m1, m2, budget(p, m1, m2), 123);
    const ProtocolConfig cfg{p, m1, m2, 3.0, 123, false};
    const ProtocolResult r = becsim::run_nn_blind_inner(cfg, in.msgs, in.trace, in.run_rng);
    check_result_shape(r, in.msgs);
    REQUIRE(r.success());
    CHECK(r.phases.back().id == "II");
    CHECK(r.phases.back().slots == 0);
    CHECK(double(m1) / double(r.slots_used) == doctest::Approx(1.0).epsilon(0.08));
    CHECK(double(m2) / double(r.slots_used) == doctest::Approx(0.25).epsilon(0.08));
}

TEST_CASE("blind inner runner absorbs an off-ratio message split through the tail") {
    // m1 far below eta*m2: the tail must carry most of w2 on its own.
    const ChannelParams p{0.25, 0.5, 0.0, 0.5};
    const size_t m2 = 1500, m1 = 2000;
    TrialInputs in = draw_trial(p, m1, m2, budget(p, m1, m2), 321);
    const ProtocolConfig cfg{p, m1, m2, 3.0, 321, false};
    const ProtocolResult r = becsim::run_nn_blind_inner(cfg, in.msgs, in.trace, in.run_rng);
    check_result_shape(r, in.msgs);
    REQUIRE(r.success());
    // Expected tail near (m2 - m1/eta)/(1-d2) = (1500 - 500) / 0.5 = 2000.
    CHECK(double(r.phases[1].slots) == doctest::Approx(2000).epsilon(0.15));
}

TEST_CASE("blind inner runner rejects two-sided caching and bad deltas") {
    Rng rng(1);
    StateTrace tr = becsim::sample_states(ChannelParams{0.25, 0.5, 0.0, 0.5}, 64, rng);
    MessagePair msgs{BitVector(4), BitVector(4)};
    CHECK_THROWS_AS(becsim::run_nn_blind_inner(ProtocolConfig{{0.25, 0.5, 0.1, 0.5}, 4, 4},
                                               msgs, tr, rng),
                    std::invalid_argument);
    CHECK_THROWS_AS(becsim::run_nn_blind_inner(ProtocolConfig{{0.5, 0.25, 0.0, 0.5}, 4, 4},
                                               msgs, tr, rng),
                    std::invalid_argument);
    CHECK_THROWS_AS(becsim::run_nn_blind_inner(ProtocolConfig{{0.25, 1.0, 0.0, 0.5}, 4, 4},
                                               msgs, tr, rng),
                    std::invalid_argument);
}

TEST_CASE("one-sided-feedback ARQ runner matches its repeat statistics") {
    // ARQ group lengths are geometric in delta1; Rx2 overhears K of each
    // group. Means: E[K] = (1-d2)/(1-d1), E[(K-1)+] per the alignment yield.
    const ChannelParams p{0.5, 0.25, 0.0, 0.5};
    const size_t m1 = 10000, m2 = 1000;
    TrialInputs in = draw_trial(p, m1, m2, budget(p, m1, m2), 6300);
    const ProtocolConfig cfg{p, m1, m2, 3.0, 6300, false};
    const ProtocolResult r =
        becsim::run_dn_semiblind_case_b(cfg, in.cache, in.msgs, in.trace, in.run_rng);
    check_result_shape(r, in.msgs);
    REQUIRE(r.success());
    REQUIRE(r.arq.has_value());
    REQUIRE(r.arq->repeats.size() == m1);
    for (size_t j = 0; j < m1; ++j) {
        CHECK(r.arq->repeats[j] >= 1);
        CHECK(r.arq->rx2_receptions[j] <= r.arq->repeats[j]);
    }
    // Total ARQ length within 2% of m1/(1-d1); so is the mean repeat count.
    CHECK(double(r.phases[0].slots) == doctest::Approx(double(m1) / 0.5).epsilon(0.02));
    CHECK(r.arq->mean_rx2_receptions() == doctest::Approx(0.75 / 0.5).epsilon(0.02));
    const double excess = 0.25 / 0.5 + (0.25 - 0.125) / (1.0 - 0.125);
    CHECK(r.arq->mean_excess_receptions() == doctest::Approx(excess).epsilon(0.02));
}

TEST_CASE("one-sided-feedback ARQ runner approaches (0.5, 1/3)") {
    const ChannelParams p{0.5, 0.5, 0.0, 0.5};
    const size_t m1 = 4000, m2 = 2667;  // m2/m1 at the corner ratio (1/3)/(1/2)
    double sum1 = 0.0, sum2 = 0.0;
    const int trials = 6;
    for (int i = 0; i < trials; ++i) {
        TrialInputs in = draw_trial(p, m1, m2, budget(p, m1, m2), 7200 + i);
        const ProtocolConfig cfg{p, m1, m2, 3.0, 7200u + i, false};
        const ProtocolResult r =
            becsim::run_dn_semiblind_case_b(cfg, in.cache, in.msgs, in.trace, in.run_rng);
        check_result_shape(r, in.msgs);
        REQUIRE(r.success());
        sum1 += double(m1) / double(r.slots_used);
        sum2 += double(m2) / double(r.slots_used);
    }
    CHECK(sum1 / trials == doctest::Approx(0.5).epsilon(0.08));
    CHECK(sum2 / trials == doctest::Approx(1.0 / 3.0).epsilon(0.08));
}

TEST_CASE("one-sided-feedback ARQ runner rejects leftover Rx1 uncertainty") {
    Rng rng(1);
    StateTrace tr = becsim::sample_states(ChannelParams{0.5, 0.5, 0.0, 0.5}, 64, rng);
    CacheAssignment cache{BitVector(4), BitVector(4)};
    MessagePair msgs{BitVector(4), BitVector(4)};
    CHECK_THROWS_AS(becsim::run_dn_semiblind_case_b(ProtocolConfig{{0.5, 0.5, 0.25, 0.5}, 4, 4},
                                                    cache, msgs, tr, rng),
                    std::invalid_argument);
    CHECK_THROWS_AS(becsim::run_dn_semiblind_case_b(ProtocolConfig{{1.0, 0.5, 0.0, 0.5}, 4, 4},
                                                    cache, msgs, tr, rng),
                    std::invalid_argument);
}

TEST_CASE("two-sided-feedback blind runner tracks the symmetric corner") {
    // Per-user corner rate at delta1 = delta2 = d, eps1 = eps2 = e is
    // (1 - d^2) / (1 + d + e); the phase split flips once e passes d.
    const size_t m = 2000;
    const struct {
        double eps;
        double rate;
    } points[] = {
        {0.25, 0.75 / 1.75},  // cache-rich, cross phase busy
        {0.5, 0.375},         // cache-rich boundary, cross phase near empty
        {0.75, 0.75 / 2.25},  // cache-poor, joint decode at receiver one
        {1.0, 0.3},           // no cache at all
    };
    for (const auto& pt : points) {
        CAPTURE(pt.eps);
        const ChannelParams p{0.5, 0.5, pt.eps, pt.eps};
        double sum1 = 0.0, sum2 = 0.0;
        const int trials = 5;
        for (int i = 0; i < trials; ++i) {
            TrialInputs in = draw_trial(p, m, m, budget(p, m, m), 8100 + i);
            const ProtocolConfig cfg{p, m, m, 3.0, 8100u + i, false};
            const ProtocolResult r = becsim::run_dd_blind_symmetric(cfg, in.msgs, in.trace, in.run_rng);
            check_result_shape(r, in.msgs);
            REQUIRE(r.success());
            if (pt.eps == 0.5) CHECK(r.phases[3].slots < m / 4);
            sum1 += double(m) / double(r.slots_used);
            sum2 += double(m) / double(r.slots_used);
        }
        CHECK(sum1 / trials == doctest::Approx(pt.rate).epsilon(0.08));
        CHECK(sum2 / trials == doctest::Approx(pt.rate).epsilon(0.08));
    }
}

TEST_CASE("two-sided-feedback blind runner with erasure-free states") {
    // Every xor lands at both receivers in one slot, so only the cache-poor
    // combination phase remains and the per-user rate is 1 / (1 + e).
    const ChannelParams p{0.0, 0.0, 0.5, 0.5};
    const size_t m = 1500;
    TrialInputs in = draw_trial(p, m, m, budget(p, m, m), 8800);
    const ProtocolConfig cfg{p, m, m, 3.0, 8800, false};
    const ProtocolResult r = becsim::run_dd_blind_symmetric(cfg, in.msgs, in.trace, in.run_rng);
    check_result_shape(r, in.msgs);
    REQUIRE(r.success());
    CHECK(r.phases[0].slots == m);
    CHECK(r.phases[1].slots == 0);
    CHECK(double(m) / double(r.slots_used) == doctest::Approx(2.0 / 3.0).epsilon(0.08));
}

TEST_CASE("two-sided-feedback blind runner rejects asymmetric configurations") {
    Rng rng(1);
    StateTrace tr = becsim::sample_states(ChannelParams{0.5, 0.5, 0.5, 0.5}, 64, rng);
    MessagePair msgs{BitVector(4), BitVector(4)};
    CHECK_THROWS_AS(becsim::run_dd_blind_symmetric(ProtocolConfig{{0.4, 0.5, 0.5, 0.5}, 4, 4},
                                                   msgs, tr, rng),
                    std::invalid_argument);
    CHECK_THROWS_AS(becsim::run_dd_blind_symmetric(ProtocolConfig{{0.5, 0.5, 0.5, 0.6}, 4, 4},
                                                   msgs, tr, rng),
                    std::invalid_argument);
    CHECK_THROWS_AS(becsim::run_dd_blind_symmetric(ProtocolConfig{{0.5, 0.5, 0.5, 0.5}, 4, 6},
                                                   msgs, tr, rng),
                    std::invalid_argument);
    CHECK_THROWS_AS(becsim::run_dd_blind_symmetric(ProtocolConfig{{1.0, 1.0, 0.5, 0.5}, 4, 4},
                                                   msgs, tr, rng),
                    std::invalid_argument);
}

TEST_CASE("holdings-recycling runner approaches the symmetric corner") {
    // At delta1 = delta2 = 0.5, eps1 = eps2 = 0.5 the corner solves
    // 2 R1 + (2/3) R2 = 1 symmetrically, so both rates sit at 3/8.
    const ChannelParams p{0.5, 0.5, 0.5, 0.5};
    const size_t m = 4000;
    double sum1 = 0.0, sum2 = 0.0;
    const int trials = 6;
    for (int i = 0; i < trials; ++i) {
        TrialInputs in = draw_trial(p, m, m, budget(p, m, m), 9000 + i);
        const ProtocolConfig cfg{p, m, m, 3.0, 9000u + i, false};
        const ProtocolResult r =
            becsim::run_dn_nonblind_case_c(cfg, in.cache, in.msgs, in.trace, in.run_rng);
        check_result_shape(r, in.msgs);
        REQUIRE(r.success());
        sum1 += double(m) / double(r.slots_used);
        sum2 += double(m) / double(r.slots_used);
    }
    CHECK(sum1 / trials == doctest::Approx(0.375).epsilon(0.08));
    CHECK(sum2 / trials == doctest::Approx(0.375).epsilon(0.08));
}

TEST_CASE("holdings-recycling runner ARQ length tracks its nominal formula") {
    const ChannelParams p{0.5, 0.5, 0.5, 0.5};
    const size_t m1 = 10000, m2 = 500;
    TrialInputs in = draw_trial(p, m1, m2, budget(p, m1, m2), 9500);
    const ProtocolConfig cfg{p, m1, m2, 3.0, 9500, false};
    const ProtocolResult r =
        becsim::run_dn_nonblind_case_c(cfg, in.cache, in.msgs, in.trace, in.run_rng);
    check_result_shape(r, in.msgs);
    REQUIRE(r.success());
    // Cached-bit ARQ repeats until a state-1 read: mean (1-eps2) m1 / (1-d1).
    CHECK(double(r.phases[2].slots) ==
          doctest::Approx((1.0 - p.eps2) * double(m1) / (1.0 - p.delta1)).epsilon(0.02));
    // Plain, cached, and recycled deliveries together average m1 / (1-d1).
    const double to_rx1 = double(r.phases[0].slots + r.phases[2].slots + r.phases[3].slots);
    CHECK(to_rx1 == doctest::Approx(double(m1) / (1.0 - p.delta1)).epsilon(0.02));
}

TEST_CASE("holdings-recycling runner without caches drops its third phase") {
    const ChannelParams p{0.5, 0.5, 1.0, 1.0};
    const size_t m = 1200;
    TrialInputs in = draw_trial(p, m, m, budget(p, m, m), 9700);
    const ProtocolConfig cfg{p, m, m, 3.0, 9700, false};
    const ProtocolResult r =
        becsim::run_dn_nonblind_case_c(cfg, in.cache, in.msgs, in.trace, in.run_rng);
    check_result_shape(r, in.msgs);
    REQUIRE(r.success());
    CHECK(r.phases[2].slots == 0);
    // Three-phase rate: T = m/(1-d1) + m/(1-d1 d2), both rates near 0.3.
    CHECK(double(m) / double(r.slots_used) == doctest::Approx(0.3).epsilon(0.08));
}

TEST_CASE("holdings-recycling runner with a full Rx2 cache skips plain phases") {
    const ChannelParams p{0.5, 0.5, 0.5, 0.0};
    const size_t m = 1000;
    TrialInputs in = draw_trial(p, m, m, budget(p, m, m), 9800);
    const ProtocolConfig cfg{p, m, m, 3.0, 9800, false};
    const ProtocolResult r =
        becsim::run_dn_nonblind_case_c(cfg, in.cache, in.msgs, in.trace, in.run_rng);
    check_result_shape(r, in.msgs);
    REQUIRE(r.success());
    CHECK(r.phases[0].slots == 0);
    CHECK(r.phases[3].slots == 0);
}

TEST_CASE("holdings-recycling runner rejects undeliverable configurations") {
    Rng rng(1);
    StateTrace tr = becsim::sample_states(ChannelParams{0.5, 0.5, 0.5, 0.5}, 64, rng);
    CacheAssignment cache{BitVector(4), BitVector(4)};
    MessagePair msgs{BitVector(4), BitVector(4)};
    CHECK_THROWS_AS(becsim::run_dn_nonblind_case_c(ProtocolConfig{{1.0, 0.5, 0.5, 0.5}, 4, 4},
                                                   cache, msgs, tr, rng),
                    std::invalid_argument);
    CHECK_THROWS_AS(becsim::run_dn_nonblind_case_c(ProtocolConfig{{0.5, 1.0, 0.5, 0.5}, 4, 4},
                                                   cache, msgs, tr, rng),
                    std::invalid_argument);
    CHECK_THROWS_AS(becsim::run_dn_nonblind_case_c(ProtocolConfig{{0.5, 0.5, 0.5, 0.5}, 4, 6},
                                                   cache, msgs, tr, rng),
                    std::invalid_argument);
}
