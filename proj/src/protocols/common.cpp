#include "common.hpp"

#include <bit>
#include <numeric>

namespace becsim {

namespace {

double mean_u32(const std::vector<uint32_t>& v) {
    if (v.empty()) return 0.0;
    return double(std::accumulate(v.begin(), v.end(), uint64_t{0})) / double(v.size());
}

}  // namespace

double ArqRepeatStats::mean_repeats() const { return mean_u32(repeats); }

double ArqRepeatStats::mean_rx2_receptions() const { return mean_u32(rx2_receptions); }

double ArqRepeatStats::mean_excess_receptions() const {
    if (rx2_receptions.empty()) return 0.0;
    uint64_t sum = 0;
    for (uint32_t k : rx2_receptions) sum += k > 0 ? k - 1 : 0;
    return double(sum) / double(rx2_receptions.size());
}

std::vector<size_t> ProtocolResult::phase_lengths() const {
    std::vector<size_t> out;
    out.reserve(phases.size());
    for (const PhaseDiag& d : phases) out.push_back(d.slots);
    return out;
}

namespace detail {

std::optional<BitVector> try_solve(const LinearSystem& sys, const char* site,
                                   std::string& note) {
    const SolveResult res = solve(sys);
    if (solved(res)) return solution(res);
    if (!note.empty()) note += "; ";
    note += site;
    note += std::holds_alternative<Underdetermined>(res) ? ": rank short" : ": inconsistent";
    return std::nullopt;
}

std::vector<uint32_t> set_positions(const BitVector& mask) {
    std::vector<uint32_t> out;
    out.reserve(mask.count_ones());
    for (size_t k = 0; k < mask.word_count(); ++k) {
        uint64_t w = mask.words()[k];
        while (w) {
            out.push_back(static_cast<uint32_t>(k * 64 + std::countr_zero(w)));
            w &= w - 1;
        }
    }
    return out;
}

}  // namespace detail
}  // namespace becsim
