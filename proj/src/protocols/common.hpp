#pragma once
// Shared machinery for the protocol runners: slot accounting against the
// pre-sampled state trace, cushion sizing for decode sites, and the
// substitution step every decoder repeats (project a coefficient row onto
// the coordinates still unknown, fold known values into the right-hand
// side).

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "becsim/channel.hpp"
#include "becsim/gf2.hpp"
#include "becsim/protocols.hpp"
#include "becsim/rng.hpp"

namespace becsim::detail {

// Surplus equations kept at each decode site so a random system reaches full
// column rank with overwhelming probability (shortfall odds about 2^-25).
inline constexpr double kRankMargin = 25.0;
// Cushion width, in standard deviations, against the site's count
// fluctuations (unknown counts the encoder cannot see, binomial reception
// counts it cannot steer).
inline constexpr double kSigmaZ = 4.0;

// Hard ceiling the slack knob puts on any one site's cushion, in slots.
inline size_t slack_cap(double c, size_t m_base) {
    if (c <= 0.0 || m_base == 0) return 0;
    return static_cast<size_t>(std::ceil(c * std::pow(double(m_base), 2.0 / 3.0)));
}

// Extra equations a decode site should hold beyond the exact unknown count.
// Knob values below one shrink the cushion proportionally so slack stays
// monotone in the knob and vanishes at zero.
inline size_t margin_rows(double c, double sigma) {
    if (c <= 0.0) return 0;
    return static_cast<size_t>(std::ceil(std::min(c, 1.0) * (kRankMargin + kSigmaZ * sigma)));
}

// Slots delivering `rows` extra receptions at per-slot probability p_rx,
// capped by the knob's budget for a site of size m_base.
inline size_t extra_slots(double c, size_t m_base, size_t rows, double p_rx) {
    if (rows == 0 || p_rx <= 0.0) return 0;
    const auto need = static_cast<size_t>(std::ceil(double(rows) / p_rx));
    return std::min(slack_cap(c, m_base), need);
}

inline size_t ceil_div_prob(double amount, double p) {
    return amount <= 0.0 ? 0 : static_cast<size_t>(std::ceil(amount / p));
}

// Walks the state trace slot by slot, keeping per-phase slot and reception
// counts and (optionally) the full transcript. Throws when a run needs more
// slots than the caller pre-sampled, which is a harness sizing bug rather
// than a channel event.
class SlotRunner {
  public:
    SlotRunner(const StateTrace& trace, bool record, std::string protocol)
        : trace_(trace), record_(record), name_(std::move(protocol)) {}

    void begin_phase(std::string id) {
        diags_.push_back(PhaseDiag{std::move(id), 0, 0, 0});
    }

    // Sends x over the next slot; returns the two reception states.
    std::pair<bool, bool> step(bool x) {
        if (t_ >= trace_.slots())
            throw std::length_error(name_ + ": state trace exhausted after " +
                                    std::to_string(t_) + " slots");
        const bool s1 = trace_.s1[t_] != 0;
        const bool s2 = trace_.s2[t_] != 0;
        xs_.push_back(static_cast<uint8_t>(x));
        ++t_;
        PhaseDiag& d = diags_.back();
        ++d.slots;
        d.eq_rx1 += s1;
        d.eq_rx2 += s2;
        return {s1, s2};
    }

    size_t used() const { return t_; }
    bool sent(size_t t) const { return xs_[t] != 0; }
    bool got1(size_t t) const { return trace_.s1[t] != 0; }
    bool got2(size_t t) const { return trace_.s2[t] != 0; }
    const std::vector<PhaseDiag>& diags() const { return diags_; }

    std::vector<PhaseDiag> take_diags() { return std::move(diags_); }

    std::optional<Transcript> take_transcript() const {
        if (!record_) return std::nullopt;
        Transcript tr;
        for (size_t t = 0; t < t_; ++t) tr.append(xs_[t], trace_.s1[t], trace_.s2[t]);
        return tr;
    }

  private:
    const StateTrace& trace_;
    bool record_;
    std::string name_;
    size_t t_ = 0;
    std::vector<uint8_t> xs_;
    std::vector<PhaseDiag> diags_;
};

// Row over the full coordinate space, folded into a system over the unknown
// coordinates only: knowns contribute to the right-hand side.
inline void add_masked_equation(LinearSystem& sys, const BitVector& row,
                                const BitVector& unknown_mask, size_t n_unknown,
                                const BitVector& known_values, bool y) {
    sys.add_equation(compress_bits(row, unknown_mask, n_unknown), y ^ dot(row, known_values));
}

inline BitVector masked_values(const BitVector& v, const BitVector& mask) {
    if (v.size() != mask.size())
        throw std::invalid_argument("masked_values: length mismatch");
    BitVector out = v;
    uint64_t* w = out.words();
    for (size_t k = 0; k < out.word_count(); ++k) w[k] &= mask.words()[k];
    return out;
}

inline BitVector invert_mask(const BitVector& mask) {
    BitVector out = mask;
    uint64_t* w = out.words();
    for (size_t k = 0; k < out.word_count(); ++k) w[k] = ~w[k];
    out.mask_tail();
    return out;
}

// ORs src into dst starting at bit offset; used to lay rows and value
// vectors out over a concatenated coordinate space.
inline void paste_bits(BitVector& dst, const BitVector& src, size_t offset) {
    if (offset + src.size() > dst.size())
        throw std::invalid_argument("paste_bits: source overruns destination");
    if (src.size() == 0) return;
    uint64_t* dw = dst.words();
    const uint64_t* sw = src.words();
    const size_t base = offset >> 6;
    const unsigned shift = offset & 63;
    for (size_t k = 0; k < src.word_count(); ++k) {
        dw[base + k] |= sw[k] << shift;
        if (shift != 0 && base + k + 1 < dst.word_count())
            dw[base + k + 1] |= sw[k] >> (64 - shift);
    }
}

// Conditional moments of Rx2's usable equations from one ARQ group, given
// its observed length L: a bit Rx2 already knows yields K ~ Bin(L, q)
// equations, an unknown one (K-1)+ through pairwise cancellation.
struct GroupYield {
    double mean;
    double var;
};

inline GroupYield known_bit_yield(uint32_t len, double q) {
    const double L = double(len);
    return {L * q, L * q * (1.0 - q)};
}

inline GroupYield unknown_bit_yield(uint32_t len, double q) {
    const double L = double(len);
    const double p0 = std::pow(1.0 - q, L);  // no reception at all
    const double mean = L * q - 1.0 + p0;
    const double second = L * q * (1.0 - q) + (L * q - 1.0) * (L * q - 1.0) - p0;
    return {mean, second - mean * mean};
}

// Yield when the bit is known to Rx2 with probability p_know and the encoder
// cannot tell which way it went.
inline GroupYield mixed_bit_yield(uint32_t len, double q, double p_know) {
    const GroupYield k = known_bit_yield(len, q);
    const GroupYield u = unknown_bit_yield(len, q);
    const double mean = p_know * k.mean + (1.0 - p_know) * u.mean;
    const double second =
        p_know * (k.var + k.mean * k.mean) + (1.0 - p_know) * (u.var + u.mean * u.mean);
    return {mean, second - mean * mean};
}

// Solves and unwraps, recording a failure note instead of throwing: decoders
// legitimately come up short of rank when counts fluctuate past the cushion.
std::optional<BitVector> try_solve(const LinearSystem& sys, const char* site,
                                   std::string& note);

// Positions of set bits, ascending.
std::vector<uint32_t> set_positions(const BitVector& mask);

inline void check_run_inputs(const ProtocolConfig& cfg, const MessagePair& msgs,
                             const std::string& name) {
    cfg.params.validate();
    if (cfg.slack_coeff < 0.0)
        throw std::invalid_argument(name + ": slack_coeff must be nonnegative");
    if (msgs.w1.size() != cfg.m1 || msgs.w2.size() != cfg.m2)
        throw std::invalid_argument(name + ": message lengths disagree with config");
}

inline void check_cache_shape(const ProtocolConfig& cfg, const CacheAssignment& cache,
                              const std::string& name) {
    if (cache.e1.size() != cfg.m2 || cache.e2.size() != cfg.m1)
        throw std::invalid_argument(name + ": cache mask lengths disagree with config");
}

}  // namespace becsim::detail
