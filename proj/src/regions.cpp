#include "becsim/regions.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace becsim {

namespace {

constexpr double kDedupTol = 1e-12;
constexpr double kVertexFeasTol = 1e-9;

// min{num/den, 1} evaluated without dividing by a vanishing denominator:
// when num >= den the ratio is clipped anyway, and num < den implies den > 0.
double clipped_ratio(double num, double den) { return num >= den ? 1.0 : num / den; }

struct Line {
    double a1, a2, b;  // a1*x + a2*y = b
};

bool satisfies_all(const RateRegion& r, double x, double y, double tol) {
    if (x < -tol || y < -tol) return false;
    for (const HalfPlane& hp : r.halfplanes)
        if (hp.c1 * x + hp.c2 * y > hp.bound + tol) return false;
    return true;
}

}  // namespace

RateRegion region_nn_nonblind(const ChannelParams& p) {
    p.validate();
    const double b1 = p.eps2 * clipped_ratio(1.0 - p.delta2, 1.0 - p.delta1);
    const double b2 = p.eps1 * clipped_ratio(1.0 - p.delta1, 1.0 - p.delta2);
    RateRegion r;
    r.label = "nn-nonblind";
    r.halfplanes = {{b1, 1.0, 1.0 - p.delta2}, {1.0, b2, 1.0 - p.delta1}};
    return r;
}

RateRegion region_dd_outer(const ChannelParams& p) {
    p.validate();
    // The denominator vanishes only when both channels always erase, where
    // the numerators vanish too; the constraints then pin both rates to 0.
    const double den = 1.0 - p.delta1 * p.delta2;
    const double b1 = den > 0.0 ? p.eps2 * (1.0 - p.delta2) / den : 0.0;
    const double b2 = den > 0.0 ? p.eps1 * (1.0 - p.delta1) / den : 0.0;
    RateRegion r;
    r.label = "dd-outer";
    r.halfplanes = {{1.0, 0.0, 1.0 - p.delta1},
                    {0.0, 1.0, 1.0 - p.delta2},
                    {b1, 1.0, 1.0 - p.delta2},
                    {1.0, b2, 1.0 - p.delta1}};
    return r;
}

RateRegion region_nn_blind_inner(const ChannelParams& p) {
    p.validate();
    if (p.eps1 != 0.0)
        throw std::invalid_argument("region_nn_blind_inner: requires eps1 = 0");
    if (p.delta2 < p.delta1)
        throw std::invalid_argument("region_nn_blind_inner: requires delta2 >= delta1");
    const double coeff =
        (p.eps2 + p.delta1 * (1.0 - p.eps2)) * clipped_ratio(1.0 - p.delta2, 1.0 - p.delta1);
    RateRegion r;
    r.label = "nn-blind-inner";
    r.halfplanes = {{coeff, 1.0, 1.0 - p.delta2}, {1.0, 0.0, 1.0 - p.delta1}};
    return r;
}

std::vector<RatePair> vertices(const RateRegion& r) {
    std::vector<Line> lines;
    lines.push_back({1.0, 0.0, 0.0});  // R1 = 0
    lines.push_back({0.0, 1.0, 0.0});  // R2 = 0
    for (const HalfPlane& hp : r.halfplanes) lines.push_back({hp.c1, hp.c2, hp.bound});

    std::vector<RatePair> pts;
    for (size_t i = 0; i < lines.size(); ++i) {
        for (size_t j = i + 1; j < lines.size(); ++j) {
            const double det = lines[i].a1 * lines[j].a2 - lines[i].a2 * lines[j].a1;
            if (std::abs(det) < 1e-15) continue;
            double x = (lines[i].b * lines[j].a2 - lines[j].b * lines[i].a2) / det;
            double y = (lines[i].a1 * lines[j].b - lines[j].a1 * lines[i].b) / det;
            if (!satisfies_all(r, x, y, kVertexFeasTol)) continue;
            if (std::abs(x) < kDedupTol) x = 0.0;
            if (std::abs(y) < kDedupTol) y = 0.0;
            bool dup = false;
            for (const RatePair& q : pts)
                if (std::abs(q.r1 - x) <= kDedupTol && std::abs(q.r2 - y) <= kDedupTol) {
                    dup = true;
                    break;
                }
            if (!dup) pts.push_back({x, y});
        }
    }
    if (pts.empty()) throw std::invalid_argument("vertices: region is empty");

    double cx = 0, cy = 0;
    for (const RatePair& q : pts) {
        cx += q.r1;
        cy += q.r2;
    }
    cx /= static_cast<double>(pts.size());
    cy /= static_cast<double>(pts.size());
    std::sort(pts.begin(), pts.end(), [&](const RatePair& a, const RatePair& b) {
        const double aa = std::atan2(a.r2 - cy, a.r1 - cx);
        const double ab = std::atan2(b.r2 - cy, b.r1 - cx);
        if (aa != ab) return aa < ab;
        if (a.r1 != b.r1) return a.r1 < b.r1;
        return a.r2 < b.r2;
    });
    return pts;
}

bool contains(const RateRegion& r, const RatePair& pt, double tol) {
    if (tol < 0.0) throw std::invalid_argument("contains: tolerance must be nonnegative");
    return satisfies_all(r, pt.r1, pt.r2, tol);
}

RatePair max_sum_rate_vertex(const RateRegion& r) {
    const std::vector<RatePair> vs = vertices(r);
    RatePair best = vs.front();
    for (const RatePair& v : vs) {
        const double s = v.r1 + v.r2, bs = best.r1 + best.r2;
        if (s > bs + kDedupTol || (std::abs(s - bs) <= kDedupTol && v.r1 > best.r1)) best = v;
    }
    return best;
}

RatePair corner_case_b(const ChannelParams& p) {
    p.validate();
    if (p.eps1 != 0.0) throw std::invalid_argument("corner_case_b: requires eps1 = 0");
    const double den = 1.0 - p.delta1 * p.delta2;
    const double frac = den > 0.0 ? p.eps2 * (1.0 - p.delta1) / den : 0.0;
    return {1.0 - p.delta1, (1.0 - p.delta2) * (1.0 - frac)};
}

std::string region_csv(const RateRegion& r) {
    std::ostringstream os;
    os << std::setprecision(12);
    for (const RatePair& v : vertices(r)) os << r.label << ',' << v.r1 << ',' << v.r2 << '\n';
    return os.str();
}

}  // namespace becsim
