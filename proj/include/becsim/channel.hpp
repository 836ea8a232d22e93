#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "becsim/gf2.hpp"
#include "becsim/rng.hpp"

namespace becsim {

// Erasure and caching probabilities for the two-receiver broadcast channel.
// delta_i is the per-slot erasure probability at receiver i; eps_i is the
// fraction of the other user's message that receiver i does not cache.
struct ChannelParams {
    double delta1 = 0.0;
    double delta2 = 0.0;
    double eps1 = 0.0;
    double eps2 = 0.0;

    // Throws std::invalid_argument unless all four values lie in [0, 1].
    void validate() const;
};

// Per-slot reception states: 1 means receiver i saw the slot, 0 means it was
// erased. Receivers always know their own states; what the transmitter sees
// of them is governed by CsitScenario.
struct StateTrace {
    std::vector<uint8_t> s1;
    std::vector<uint8_t> s2;

    size_t slots() const { return s1.size(); }
};

// Which of the other user's message bits each receiver holds. e1 is indexed
// by W2 positions (bit set: cached at Rx1), e2 by W1 positions (cached at
// Rx2).
struct CacheAssignment {
    BitVector e1;
    BitVector e2;
};

// Transmitter-side knowledge of past reception states: none, one receiver's
// with unit delay, or both receivers' with unit delay.
enum class Csit { NN, DN, DD };

struct CsitScenario {
    Csit kind = Csit::NN;
    int dn_receiver = 0;  // which receiver feeds back; meaningful only for DN

    static CsitScenario nn() { return {Csit::NN, 0}; }
    static CsitScenario dn(int receiver);  // throws unless receiver is 1 or 2
    static CsitScenario dd() { return {Csit::DD, 0}; }
};

// What the encoder may inspect when choosing the bit for slot t. Slots are
// numbered from 1; each visible prefix covers slots 1..t-1 (unit delay), and
// a prefix is absent entirely when the scenario withholds that receiver's
// states. An absent prefix differs from a present empty one at t = 1.
struct FeedbackView {
    size_t time = 0;
    std::optional<std::span<const uint8_t>> visible_s1;
    std::optional<std::span<const uint8_t>> visible_s2;
};

// Reception value for an erased slot. Receivers know their own state, so an
// erased slot is distinguishable from a received 0.
inline constexpr uint8_t kErased = 0xFF;

struct SlotRecord {
    uint8_t x;
    uint8_t s1;
    uint8_t s2;
    uint8_t y1;  // x when s1 == 1, kErased otherwise
    uint8_t y2;  // x when s2 == 1, kErased otherwise
};

// Slot-by-slot record of one transmission, kept for debugging replays.
struct Transcript {
    std::vector<SlotRecord> records;

    size_t total_slots() const { return records.size(); }
    void append(uint8_t x, uint8_t s1, uint8_t s2);
};

// Draws n slots of reception states, one Bernoulli(1 - delta_i) draw per slot
// per receiver, independent across slots and receivers.
StateTrace sample_states(const ChannelParams& params, size_t n, Rng& rng);

// Draws each receiver's cache mask: e1 over m2 indices with per-bit success
// probability 1 - eps1, e2 over m1 indices with 1 - eps2. Callers keep cache
// draws independent of state draws by splitting one master seed into
// per-purpose streams with Rng::fork before calling either sampler.
CacheAssignment sample_cache(const ChannelParams& params, size_t m1, size_t m2, Rng& rng);

// The channel law: receiver i gets x when its state is 1 and kErased when 0.
std::pair<uint8_t, uint8_t> transmit(uint8_t x, uint8_t s1, uint8_t s2);

// The state prefixes the scenario lets the transmitter see at slot t.
// Throws std::out_of_range unless 1 <= t <= trace.slots().
FeedbackView feedback_view(const CsitScenario& scenario, const StateTrace& trace, size_t t);

// JSON forms for replay dumps. A state trace is {"s1": [...], "s2": [...]};
// a transcript is {"slots": [{"x", "s1", "s2", "y1", "y2"}...],
// "total_slots": n} with erased receptions encoded as null. Parsing rejects
// records that violate the channel law.
std::string to_json(const StateTrace& trace);
std::string to_json(const Transcript& transcript);
StateTrace state_trace_from_json(const std::string& text);
Transcript transcript_from_json(const std::string& text);

}  // namespace becsim
