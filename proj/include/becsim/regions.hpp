#pragma once

#include <string>
#include <vector>

#include "becsim/channel.hpp"

namespace becsim {

// One constraint c1*R1 + c2*R2 <= bound on a rate pair, in bits per slot.
struct HalfPlane {
    double c1;
    double c2;
    double bound;
};

struct RatePair {
    double r1;
    double r2;
};

// Convex rate region in the nonnegative quadrant: the intersection of the
// listed half-planes with R1 >= 0 and R2 >= 0 (the latter two implicit).
struct RateRegion {
    std::string label;
    std::vector<HalfPlane> halfplanes;
};

// Capacity region for a transmitter that knows the cache masks but never
// sees channel states. Two half-planes:
//   b1*R1 + R2 <= 1 - delta2 and R1 + b2*R2 <= 1 - delta1,
// with b_i = eps_other * min{(1 - delta_other) / (1 - delta_i), 1}.
RateRegion region_nn_nonblind(const ChannelParams& p);

// Outer bound for a transmitter with unit-delay state feedback from both
// receivers. Four half-planes: R_i <= 1 - delta_i and
//   b_i*R_i + R_other <= 1 - delta_other,
// with b_i = eps_other * (1 - delta_other) / (1 - delta1*delta2).
RateRegion region_dd_outer(const ChannelParams& p);

// Achievable region for a cache-blind transmitter with no state feedback,
// in the regime delta2 >= delta1 with eps1 = 0 (Rx1 caches all of W2).
// Throws std::invalid_argument outside that regime.
RateRegion region_nn_blind_inner(const ChannelParams& p);

// Counterclockwise vertex list of the region polygon: all pairwise
// constraint intersections that satisfy every constraint, deduplicated to
// 1e-12. Throws std::invalid_argument if nothing is feasible.
std::vector<RatePair> vertices(const RateRegion& r);

// True when every half-plane (and nonnegativity) holds within additive tol.
bool contains(const RateRegion& r, const RatePair& pt, double tol);

// The vertex maximizing R1 + R2, ties broken toward larger R1.
RatePair max_sum_rate_vertex(const RateRegion& r);

// Corner point achieved with one-sided feedback when Rx1 caches all of W2
// (eps1 = 0, enforced): R1 = 1 - delta1 at full first-user rate, with
//   R2 = (1 - delta2) * (1 - eps2*(1 - delta1)/(1 - delta1*delta2)).
// Lies on the boundary of region_dd_outer. Throws unless eps1 == 0.
RatePair corner_case_b(const ChannelParams& p);

// CSV rows "label,r1,r2", one vertex per line in vertex order.
std::string region_csv(const RateRegion& r);

}  // namespace becsim
