#include "becsim/channel.hpp"

#include <cmath>
#include <stdexcept>

#include "json.hpp"

namespace becsim {

namespace {

bool valid_probability(double p) { return p >= 0.0 && p <= 1.0; }

// Fills one state sequence with Bernoulli(1 - erasure_prob) draws.
void fill_states(std::vector<uint8_t>& s, size_t n, double erasure_prob, Rng& rng) {
    s.resize(n);
    for (size_t t = 0; t < n; ++t) s[t] = rng.bernoulli(1.0 - erasure_prob) ? 1 : 0;
}

BitVector sample_mask(size_t len, double keep_prob, Rng& rng) {
    BitVector mask(len);
    for (size_t i = 0; i < len; ++i) mask.set(i, rng.bernoulli(keep_prob));
    return mask;
}

nlohmann::json reception_to_json(uint8_t y) {
    if (y == kErased) return nullptr;
    return static_cast<int>(y);
}

uint8_t reception_from_json(const nlohmann::json& j) {
    if (j.is_null()) return kErased;
    const int v = j.get<int>();
    if (v != 0 && v != 1) throw std::invalid_argument("transcript: reception must be 0, 1, or null");
    return static_cast<uint8_t>(v);
}

std::vector<uint8_t> bit_sequence_from_json(const nlohmann::json& j, const char* what) {
    std::vector<uint8_t> out;
    out.reserve(j.size());
    for (const auto& e : j) {
        const int v = e.get<int>();
        if (v != 0 && v != 1)
            throw std::invalid_argument(std::string(what) + ": entries must be 0 or 1");
        out.push_back(static_cast<uint8_t>(v));
    }
    return out;
}

}  // namespace

void ChannelParams::validate() const {
    if (!valid_probability(delta1) || !valid_probability(delta2) || !valid_probability(eps1) ||
        !valid_probability(eps2))
        throw std::invalid_argument("ChannelParams: probabilities must lie in [0, 1]");
}

CsitScenario CsitScenario::dn(int receiver) {
    if (receiver != 1 && receiver != 2)
        throw std::invalid_argument("CsitScenario: DN receiver must be 1 or 2");
    return {Csit::DN, receiver};
}

void Transcript::append(uint8_t x, uint8_t s1, uint8_t s2) {
    const auto [y1, y2] = transmit(x, s1, s2);
    records.push_back({x, s1, s2, y1, y2});
}

StateTrace sample_states(const ChannelParams& params, size_t n, Rng& rng) {
    params.validate();
    StateTrace trace;
    fill_states(trace.s1, n, params.delta1, rng);
    fill_states(trace.s2, n, params.delta2, rng);
    return trace;
}

CacheAssignment sample_cache(const ChannelParams& params, size_t m1, size_t m2, Rng& rng) {
    params.validate();
    CacheAssignment cache;
    cache.e1 = sample_mask(m2, 1.0 - params.eps1, rng);
    cache.e2 = sample_mask(m1, 1.0 - params.eps2, rng);
    return cache;
}

std::pair<uint8_t, uint8_t> transmit(uint8_t x, uint8_t s1, uint8_t s2) {
    return {s1 ? x : kErased, s2 ? x : kErased};
}

FeedbackView feedback_view(const CsitScenario& scenario, const StateTrace& trace, size_t t) {
    if (t < 1 || t > trace.slots())
        throw std::out_of_range("feedback_view: slot outside the trace");
    FeedbackView view;
    view.time = t;
    const std::span<const uint8_t> p1(trace.s1.data(), t - 1);
    const std::span<const uint8_t> p2(trace.s2.data(), t - 1);
    switch (scenario.kind) {
        case Csit::NN: break;
        case Csit::DN:
            if (scenario.dn_receiver == 1) view.visible_s1 = p1;
            else view.visible_s2 = p2;
            break;
        case Csit::DD:
            view.visible_s1 = p1;
            view.visible_s2 = p2;
            break;
    }
    return view;
}

std::string to_json(const StateTrace& trace) {
    nlohmann::json j;
    j["s1"] = trace.s1;
    j["s2"] = trace.s2;
    return j.dump();
}

std::string to_json(const Transcript& transcript) {
    nlohmann::json slots = nlohmann::json::array();
    for (const SlotRecord& r : transcript.records) {
        slots.push_back({{"x", static_cast<int>(r.x)},
                         {"s1", static_cast<int>(r.s1)},
                         {"s2", static_cast<int>(r.s2)},
                         {"y1", reception_to_json(r.y1)},
                         {"y2", reception_to_json(r.y2)}});
    }
    nlohmann::json j;
    j["slots"] = std::move(slots);
    j["total_slots"] = transcript.total_slots();
    return j.dump();
}

StateTrace state_trace_from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    StateTrace trace;
    trace.s1 = bit_sequence_from_json(j.at("s1"), "state trace s1");
    trace.s2 = bit_sequence_from_json(j.at("s2"), "state trace s2");
    if (trace.s1.size() != trace.s2.size())
        throw std::invalid_argument("state trace: s1 and s2 lengths differ");
    return trace;
}

Transcript transcript_from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    Transcript transcript;
    for (const auto& e : j.at("slots")) {
        SlotRecord r;
        const int x = e.at("x").get<int>();
        const int s1 = e.at("s1").get<int>();
        const int s2 = e.at("s2").get<int>();
        if ((x != 0 && x != 1) || (s1 != 0 && s1 != 1) || (s2 != 0 && s2 != 1))
            throw std::invalid_argument("transcript: x and states must be 0 or 1");
        r.x = static_cast<uint8_t>(x);
        r.s1 = static_cast<uint8_t>(s1);
        r.s2 = static_cast<uint8_t>(s2);
        r.y1 = reception_from_json(e.at("y1"));
        r.y2 = reception_from_json(e.at("y2"));
        const auto [y1, y2] = transmit(r.x, r.s1, r.s2);
        if (r.y1 != y1 || r.y2 != y2)
            throw std::invalid_argument("transcript: reception contradicts the channel law");
        transcript.records.push_back(r);
    }
    if (j.contains("total_slots") &&
        j.at("total_slots").get<size_t>() != transcript.records.size())
        throw std::invalid_argument("transcript: total_slots disagrees with the slot list");
    return transcript;
}

}  // namespace becsim
