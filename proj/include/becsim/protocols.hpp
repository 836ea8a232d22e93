#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "becsim/channel.hpp"
#include "becsim/gf2.hpp"
#include "becsim/rng.hpp"

namespace becsim {

// Knobs shared by every protocol run. slack_coeff scales the slot cushion
// appended wherever a phase length has to be fixed without feedback: each
// decode site gets a cushion of (rank margin + four standard deviations of
// its count fluctuations) receptions, converted to slots and capped at
// ceil(slack_coeff * m^{2/3}). Zero disables the cushion entirely; values
// below one scale it down proportionally. Sites the transmitter can observe
// exactly (feedback-terminated quotas, counts implied by a known cache mask)
// keep only the rank-margin part.
struct ProtocolConfig {
    ChannelParams params;
    size_t m1 = 0;
    size_t m2 = 0;
    double slack_coeff = 3.0;
    uint64_t seed = 1;              // stream callers build the run's Rng from
    bool record_transcript = false;
};

// The two private messages: w1 (m1 bits) addressed to Rx1, w2 (m2 bits) to
// Rx2.
struct MessagePair {
    BitVector w1;
    BitVector w2;
};

// One scheduled phase. planned_slots is empty for feedback-terminated phases,
// whose length is decided online; termination spells out the stopping rule in
// words for logs and transcript dumps.
struct PhaseSpec {
    std::string id;
    std::optional<size_t> planned_slots;
    std::string termination;
};

struct PhasePlan {
    std::vector<PhaseSpec> phases;
};

// Actual per-phase outcome: elapsed slots and how many unerased receptions
// (usable equations before any stripping) each receiver collected.
struct PhaseDiag {
    std::string id;
    size_t slots = 0;
    size_t eq_rx1 = 0;
    size_t eq_rx2 = 0;
};

// Retransmission bookkeeping for ARQ phases: repeats[j] counts the slots
// spent on bit j (at least 1) and rx2_receptions[j] how many of those Rx2
// overheard (never more than repeats[j]).
struct ArqRepeatStats {
    std::vector<uint32_t> repeats;
    std::vector<uint32_t> rx2_receptions;

    double mean_repeats() const;
    double mean_rx2_receptions() const;
    // Mean of (K - 1)+ over bits: receptions usable by Rx2 after one is
    // burned cancelling an unknown bit it shares the slot with.
    double mean_excess_receptions() const;
};

// Outcome of one run. A missing decoded_i marks a decode failure at that
// receiver (rank shortfall); callers count it, nothing throws. slots_used
// always equals the sum of the per-phase slot counts.
struct ProtocolResult {
    std::optional<BitVector> decoded1;
    std::optional<BitVector> decoded2;
    size_t slots_used = 0;
    PhasePlan plan;
    std::vector<PhaseDiag> phases;
    std::optional<ArqRepeatStats> arq;
    std::optional<Transcript> transcript;
    std::string failure_note;  // empty on success

    bool success() const { return decoded1.has_value() && decoded2.has_value(); }
    std::vector<size_t> phase_lengths() const;
};

// All runners share the calling convention: the trace supplies pre-sampled
// reception states (one per slot, consumed in order; std::length_error if it
// runs out), rng supplies every coding coefficient through per-phase forked
// streams so decoders can regenerate rows instead of storing them, and the
// returned messages are checked bit-exact by the harness. Runners for blind
// encoders take no cache argument at all: they draw the receiver caches from
// rng internally, after the transmission schedule is fixed, so the encoder
// cannot depend on them even by accident. Semi-blind and non-blind runners
// take the assignment explicitly; the encoder half still consults only the
// masks its scenario grants (e2, or both), while decoders use their own side
// naturally.

// No CSIT, encoder sees e2 only; needs delta2 >= delta1. Phase I-a floods
// random combinations of w2 sized for Rx1's uncached share; Phase I-b pairs
// combinations of the Rx2-cached part of w1 with fresh w2 combinations until
// both receivers' Phase-I systems close; Phase II delivers the remaining w1
// bits. Rx1 decodes w2, then the cached-at-Rx2 part of w1, then the rest;
// Rx2 strips its cached w1 bits and solves w2 from all of Phase I.
ProtocolResult run_nn_semiblind(const ProtocolConfig& cfg, const CacheAssignment& cache,
                                const MessagePair& msgs, const StateTrace& trace, Rng& rng);

// No CSIT, fully blind, symmetric channel (delta1 = delta2, eps1 = eps2 > 0,
// m1 = m2): one fountain over the concatenated 2m bits; each receiver adds
// its cached bits as unit equations and solves the joint system.
ProtocolResult run_nn_blind_symmetric(const ProtocolConfig& cfg, const MessagePair& msgs,
                                      const StateTrace& trace, Rng& rng);

// No CSIT, fully blind, eps1 = 0 and delta2 >= delta1. Phase 1 superposes
// one uncoded w1 bit per slot on a fresh w2 combination; Rx2 keeps the slots
// whose w1 bit it caches. Phase 2 is a fountain over w1 for Rx1's erasures.
ProtocolResult run_nn_blind_inner(const ProtocolConfig& cfg, const MessagePair& msgs,
                                  const StateTrace& trace, Rng& rng);

// Delayed CSIT from Rx1 only, encoder sees e2, eps1 = 0. Each w1 bit rides
// ARQ until Rx1 confirms it, superposed with a fresh combination of w2; a
// short fountain tail over w2 covers Rx2's remaining rank. Rx2 turns slots
// with cached w1 bits into direct equations and pairs consecutive receptions
// of an uncached bit to cancel it.
ProtocolResult run_dn_semiblind_case_b(const ProtocolConfig& cfg, const CacheAssignment& cache,
                                       const MessagePair& msgs, const StateTrace& trace,
                                       Rng& rng);

// Delayed CSIT from Rx1 only, non-blind (both masks). Phase I sends the
// Rx2-uncached w1 bits once each; Phase II fountains over the Rx1-uncached
// w2 bits; Phases III and IV ARQ the remaining w1 bits, each slot superposed
// with combinations of (Phase-II symbols Rx1 received, Rx1-cached w2 bits),
// plus a top-up fountain tail sized online from the repeat counts so Rx2's
// system closes even when (m1, m2) sit away from the balanced corner.
ProtocolResult run_dn_nonblind_case_c(const ProtocolConfig& cfg, const CacheAssignment& cache,
                                      const MessagePair& msgs, const StateTrace& trace,
                                      Rng& rng);

// Delayed CSIT from both receivers, fully blind, symmetric channel. Phase I
// ARQs each XOR a_j ^ b_j until some receiver holds it; Phases II/III
// fountain the overheard b / a bits to quota; Phase IV either XORs two
// fountains (eps <= delta) or fountains a-bits alone (eps > delta).
ProtocolResult run_dd_blind_symmetric(const ProtocolConfig& cfg, const MessagePair& msgs,
                                      const StateTrace& trace, Rng& rng);

}  // namespace becsim
