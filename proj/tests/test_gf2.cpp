#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "becsim/gf2.hpp"
#include "becsim/rng.hpp"

using becsim::BitMatrix;
using becsim::BitVector;
using becsim::LinearSystem;
using becsim::Rng;

namespace {

// Reference rank for small matrices: the row space of an r-row matrix has
// exactly 2^rank(A) distinct elements, so enumerate every subset XOR.
size_t span_rank(const BitMatrix& m) {
    REQUIRE(m.rows() <= 8);
    REQUIRE(m.cols() <= 64);
    std::set<uint64_t> span;
    for (uint64_t mask = 0; mask < (uint64_t{1} << m.rows()); ++mask) {
        uint64_t acc = 0;
        for (size_t r = 0; r < m.rows(); ++r)
            if (mask & (uint64_t{1} << r)) acc ^= m.row(r)[0];
        span.insert(acc);
    }
    size_t rank = 0;
    while ((size_t{1} << rank) < span.size()) ++rank;
    REQUIRE((size_t{1} << rank) == span.size());
    return rank;
}

// Plain one-pass row reduction, kept deliberately naive as a second opinion
// for sizes the span oracle cannot reach.
size_t naive_rank(const BitMatrix& m) {
    std::vector<BitVector> rows;
    rows.reserve(m.rows());
    for (size_t r = 0; r < m.rows(); ++r) {
        BitVector v(m.cols());
        for (size_t c = 0; c < m.cols(); ++c) v.set(c, m.get(r, c));
        rows.push_back(std::move(v));
    }
    size_t rank = 0;
    for (size_t c = 0; c < m.cols() && rank < rows.size(); ++c) {
        size_t hit = SIZE_MAX;
        for (size_t r = rank; r < rows.size(); ++r)
            if (rows[r].get(c)) { hit = r; break; }
        if (hit == SIZE_MAX) continue;
        std::swap(rows[rank], rows[hit]);
        for (size_t r = rank + 1; r < rows.size(); ++r)
            if (rows[r].get(c)) rows[r].xor_with(rows[rank]);
        ++rank;
    }
    return rank;
}

BitMatrix random_matrix(size_t rows, size_t cols, Rng& rng) {
    BitMatrix m(0, cols);
    m.reserve_rows(rows);
    for (size_t r = 0; r < rows; ++r) m.append_random_row(rng);
    return m;
}

BitVector matvec(const BitMatrix& a, const BitVector& x) {
    BitVector b(a.rows());
    for (size_t r = 0; r < a.rows(); ++r)
        b.set(r, becsim::dot_words(a.row(r), x.words(), x.word_count()));
    return b;
}

}  // namespace

TEST_CASE("bit vector basics") {
    BitVector v(130);
    CHECK(v.size() == 130);
    CHECK(v.count_ones() == 0);
    v.set(0, true);
    v.set(64, true);
    v.set(129, true);
    CHECK(v.count_ones() == 3);
    CHECK(v.get(64));
    CHECK_FALSE(v.get(63));
    v.flip(64);
    CHECK_FALSE(v.get(64));
    CHECK(v.count_ones() == 2);

    BitVector w(130);
    w.set(0, true);
    v.xor_with(w);
    CHECK_FALSE(v.get(0));
    CHECK(v.get(129));

    BitVector bad(7);
    CHECK_THROWS_AS(v.xor_with(bad), std::invalid_argument);

    SUBCASE("length zero") {
        BitVector z(0);
        CHECK(z.size() == 0);
        CHECK(z.count_ones() == 0);
        Rng rng(1);
        BitVector rz = becsim::random_vector(0, rng);
        CHECK(rz.size() == 0);
        CHECK(becsim::dot(z, rz) == false);
    }
}

TEST_CASE("dot products") {
    // 1101 . 1011 = 1*1 + 1*0 + 0*1 + 1*1 = 0 over GF(2).
    BitVector c(4), m(4);
    c.set(0, true); c.set(1, true); c.set(3, true);
    m.set(0, true); m.set(2, true); m.set(3, true);
    CHECK(becsim::dot(c, m) == false);

    m.set(2, false);
    CHECK(becsim::dot(c, m) == false);
    m.set(1, true);
    CHECK(becsim::dot(c, m) == true);

    SUBCASE("unit and zero coefficients") {
        Rng rng(7);
        BitVector msg = becsim::random_vector(200, rng);
        BitVector zero(200);
        CHECK(becsim::dot(zero, msg) == false);
        for (size_t i : {size_t{0}, size_t{63}, size_t{64}, size_t{199}}) {
            BitVector unit(200);
            unit.set(i, true);
            CHECK(becsim::dot(unit, msg) == msg.get(i));
        }
    }

    SUBCASE("length mismatch throws") {
        BitVector a(5), b(6);
        CHECK_THROWS_AS(becsim::dot(a, b), std::invalid_argument);
    }
}

TEST_CASE("random vectors are balanced and reproducible") {
    Rng rng(42);
    size_t ones = 0, total = 0;
    for (int i = 0; i < 64; ++i) {
        BitVector v = becsim::random_vector(1000, rng);
        ones += v.count_ones();
        total += v.size();
    }
    const double frac = double(ones) / double(total);
    CHECK(frac > 0.3);
    CHECK(frac < 0.7);

    Rng r1(99), r2(99);
    BitVector a = becsim::random_vector(321, r1);
    BitVector b = becsim::random_vector(321, r2);
    CHECK(a == b);
    BitVector c = becsim::random_vector(321, r1);
    CHECK_FALSE(a == c);
}

TEST_CASE("rank matches subset-span oracle on small matrices") {
    Rng rng(2024);
    for (int trial = 0; trial < 500; ++trial) {
        const size_t rows = 1 + rng.next() % 8;
        const size_t cols = 1 + rng.next() % 20;
        BitMatrix m = random_matrix(rows, cols, rng);
        CHECK(becsim::rank(m) == span_rank(m));
    }
}

TEST_CASE("rank matches naive elimination on mid-size matrices") {
    Rng rng(555);
    for (int trial = 0; trial < 40; ++trial) {
        const size_t rows = 1 + rng.next() % 200;
        const size_t cols = 1 + rng.next() % 200;
        BitMatrix m = random_matrix(rows, cols, rng);
        CHECK(becsim::rank(m) == naive_rank(m));
    }

    SUBCASE("forced low rank") {
        for (int trial = 0; trial < 20; ++trial) {
            const size_t cols = 80 + rng.next() % 120;
            const size_t basis = 1 + rng.next() % 12;
            BitMatrix gen = random_matrix(basis, cols, rng);
            BitMatrix m(0, cols);
            for (size_t r = 0; r < 150; ++r) {
                const size_t idx = m.append_zero_row();
                for (size_t i = 0; i < basis; ++i)
                    if (rng.bernoulli(0.5))
                        for (size_t k = 0; k < m.width(); ++k)
                            m.row(idx)[k] ^= gen.row(i)[k];
            }
            const size_t got = becsim::rank(m);
            CHECK(got == naive_rank(m));
            CHECK(got <= basis);
        }
    }

    SUBCASE("duplicated column stays rank deficient") {
        Rng local(31337);
        BitMatrix m = random_matrix(130, 130, local);
        for (size_t r = 0; r < m.rows(); ++r) m.set(r, 37, m.get(r, 5));
        const size_t got = becsim::rank(m);
        CHECK(got == naive_rank(m));
        CHECK(got < 130);
    }
}

TEST_CASE("rank corner cases") {
    CHECK(becsim::rank(BitMatrix(0, 0)) == 0);
    CHECK(becsim::rank(BitMatrix(0, 10)) == 0);
    CHECK(becsim::rank(BitMatrix(10, 0)) == 0);
    CHECK(becsim::rank(BitMatrix(5, 9)) == 0);
    CHECK(becsim::rank(BitMatrix::identity(1)) == 1);
    CHECK(becsim::rank(BitMatrix::identity(64)) == 64);
    CHECK(becsim::rank(BitMatrix::identity(65)) == 65);
    CHECK(becsim::rank(BitMatrix::identity(200)) == 200);
}

TEST_CASE("rank is invariant under row permutation and span-preserving appends") {
    Rng rng(808);
    BitMatrix m = random_matrix(30, 40, rng);
    const size_t base = becsim::rank(m);

    BitMatrix rev(0, 40);
    for (size_t r = m.rows(); r-- > 0;) {
        const size_t idx = rev.append_zero_row();
        std::copy(m.row(r), m.row(r) + m.width(), rev.row(idx));
    }
    CHECK(becsim::rank(rev) == base);

    const size_t extra = m.append_zero_row();
    for (size_t src : {0, 3, 7})
        for (size_t k = 0; k < m.width(); ++k) m.row(extra)[k] ^= m.row(src)[k];
    CHECK(becsim::rank(m) == base);
}

TEST_CASE("solve round-trips planted solutions") {
    Rng rng(17);
    int full_rank_seen = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const size_t n = 1 + rng.next() % 200;
        BitMatrix a = random_matrix(n, n, rng);
        BitVector x = becsim::random_vector(n, rng);

        LinearSystem sys(n);
        sys.coefficients = a;
        sys.rhs = matvec(a, x);

        const becsim::SolveResult res = becsim::solve(sys);
        if (becsim::solved(res)) {
            CHECK(becsim::solution(res) == x);
            ++full_rank_seen;
        } else {
            // Singular but consistent by construction.
            CHECK(std::holds_alternative<becsim::Underdetermined>(res));
            CHECK(naive_rank(a) < n);
        }
    }
    // Square random matrices are nonsingular about 29% of the time.
    CHECK(full_rank_seen > 20);
}

TEST_CASE("solve handles overdetermined and boundary widths") {
    Rng rng(91);
    for (size_t n : {size_t{63}, size_t{64}, size_t{65}, size_t{128}, size_t{129}}) {
        BitMatrix a = random_matrix(n + 40, n, rng);
        BitVector x = becsim::random_vector(n, rng);
        LinearSystem sys(n);
        sys.coefficients = a;
        sys.rhs = matvec(a, x);
        const becsim::SolveResult res = becsim::solve(sys);
        REQUIRE(becsim::solved(res));
        CHECK(becsim::solution(res) == x);
    }
}

TEST_CASE("solve classifies underdetermined and inconsistent systems") {
    SUBCASE("two equations, three unknowns") {
        LinearSystem sys(3);
        BitVector r1(3), r2(3);
        r1.set(0, true); r1.set(2, true);
        r2.set(1, true); r2.set(2, true);
        sys.add_equation(r1, true);
        sys.add_equation(r2, false);
        CHECK(std::holds_alternative<becsim::Underdetermined>(becsim::solve(sys)));
    }

    SUBCASE("contradictory duplicate rows") {
        LinearSystem sys(3);
        BitVector r(3);
        r.set(0, true); r.set(2, true);
        sys.add_equation(r, false);
        sys.add_equation(r, true);
        CHECK(std::holds_alternative<becsim::Inconsistent>(becsim::solve(sys)));
    }

    SUBCASE("hidden contradiction in a large full-rank system") {
        Rng rng(3003);
        const size_t n = 150;
        BitMatrix a = random_matrix(n, n, rng);
        BitVector x = becsim::random_vector(n, rng);
        LinearSystem sys(n);
        sys.coefficients = a;
        sys.rhs = matvec(a, x);
        // Append the XOR of two rows with the wrong parity.
        const size_t extra = sys.coefficients.append_zero_row();
        for (size_t k = 0; k < sys.coefficients.width(); ++k)
            sys.coefficients.row(extra)[k] =
                sys.coefficients.row(0)[k] ^ sys.coefficients.row(1)[k];
        BitVector rhs(n + 1);
        for (size_t i = 0; i < n; ++i) rhs.set(i, sys.rhs.get(i));
        rhs.set(n, !(sys.rhs.get(0) ^ sys.rhs.get(1)));
        sys.rhs = rhs;
        CHECK(std::holds_alternative<becsim::Inconsistent>(becsim::solve(sys)));
    }

    SUBCASE("rank-deficient contradiction") {
        LinearSystem sys(2);
        BitVector r1(2), r2(2), r3(2);
        r1.set(0, true); r1.set(1, true);
        r2.set(0, true);
        r3.set(1, true);
        sys.add_equation(r1, true);
        sys.add_equation(r2, false);
        sys.add_equation(r3, false);
        CHECK(std::holds_alternative<becsim::Inconsistent>(becsim::solve(sys)));
    }

    SUBCASE("empty system over zero unknowns") {
        LinearSystem sys(0);
        const becsim::SolveResult res = becsim::solve(sys);
        REQUIRE(becsim::solved(res));
        CHECK(becsim::solution(res).size() == 0);
    }

    SUBCASE("no equations over three unknowns") {
        LinearSystem sys(3);
        CHECK(std::holds_alternative<becsim::Underdetermined>(becsim::solve(sys)));
    }
}

TEST_CASE("solve is deterministic for a fixed seed") {
    auto build = [] {
        Rng rng(404);
        const size_t n = 120;
        BitMatrix a = random_matrix(n + 10, n, rng);
        LinearSystem sys(n);
        sys.coefficients = a;
        sys.rhs = matvec(a, becsim::random_vector(n, rng));
        return sys;
    };
    const becsim::SolveResult r1 = becsim::solve(build());
    const becsim::SolveResult r2 = becsim::solve(build());
    REQUIRE(becsim::solved(r1));
    REQUIRE(becsim::solved(r2));
    CHECK(becsim::solution(r1) == becsim::solution(r2));
}

TEST_CASE("fraction of full-rank random square matrices") {
    // Product formula for k = 16: prod_{i=1..16} (1 - 2^-i) = 0.2887...
    Rng rng(20240601);
    const int trials = 10000;
    const size_t k = 16;
    int full = 0;
    for (int t = 0; t < trials; ++t) {
        BitMatrix m = random_matrix(k, k, rng);
        if (becsim::rank(m) == k) ++full;
    }
    const double frac = double(full) / trials;
    CHECK(std::abs(frac - 0.2887) < 0.02);
}

TEST_CASE("compress_bits and expand_bits against a per-bit walk") {
    Rng rng(7171);
    for (size_t len : {0ul, 1ul, 63ul, 64ul, 65ul, 130ul, 1000ul}) {
        for (int rep = 0; rep < 8; ++rep) {
            const BitVector v = becsim::random_vector(len, rng);
            const BitVector mask = becsim::random_vector(len, rng);
            const size_t weight = mask.count_ones();

            const BitVector packed = becsim::compress_bits(v, mask, weight);
            size_t cursor = 0;
            for (size_t i = 0; i < len; ++i)
                if (mask.get(i)) CHECK(packed.get(cursor++) == v.get(i));
            CHECK(cursor == weight);

            // Re-expanding recovers v on the mask support and zeros elsewhere.
            const BitVector spread = becsim::expand_bits(packed, mask);
            for (size_t i = 0; i < len; ++i)
                CHECK(spread.get(i) == (mask.get(i) && v.get(i)));
        }
    }

    SUBCASE("length mismatches are rejected") {
        const BitVector v(64), mask(64), shorter(10);
        CHECK_THROWS_AS(becsim::compress_bits(v, shorter, 0), std::invalid_argument);
        CHECK_THROWS_AS(becsim::compress_bits(v, mask, 1), std::invalid_argument);
        CHECK_THROWS_AS(becsim::expand_bits(shorter, mask), std::invalid_argument);
    }

    SUBCASE("all-set mask is the identity") {
        Rng r2(99);
        BitVector v = becsim::random_vector(200, r2);
        BitVector mask(200);
        for (size_t i = 0; i < 200; ++i) mask.set(i, true);
        CHECK(becsim::compress_bits(v, mask, 200) == v);
        CHECK(becsim::expand_bits(v, mask) == v);
    }
}
