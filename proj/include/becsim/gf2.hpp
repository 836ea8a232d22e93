#pragma once
// Bit-packed GF(2) vectors and matrices plus rank/solve. Every fountain-style
// encoder in this project emits rows of these and every decoder ends in one
// call to solve(), so the elimination kernel here is the simulator's hot path.
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <variant>
#include <vector>

#include "becsim/rng.hpp"

namespace becsim {

inline constexpr size_t kWordBits = 64;

inline size_t words_for_bits(size_t bits) { return (bits + kWordBits - 1) / kWordBits; }

// Fixed-length packed bit vector. Message vectors, coding coefficient vectors
// and cache masks all live in this type.
class BitVector {
  public:
    BitVector() = default;
    explicit BitVector(size_t len) : len_(len), w_(words_for_bits(len), 0) {}

    size_t size() const { return len_; }
    size_t word_count() const { return w_.size(); }
    const uint64_t* words() const { return w_.data(); }
    uint64_t* words() { return w_.data(); }

    bool get(size_t i) const { return (w_[i / 64] >> (i % 64)) & 1u; }
    void set(size_t i, bool v) {
        const uint64_t bit = uint64_t{1} << (i % 64);
        if (v) w_[i / 64] |= bit; else w_[i / 64] &= ~bit;
    }
    void flip(size_t i) { w_[i / 64] ^= uint64_t{1} << (i % 64); }

    void xor_with(const BitVector& o) {
        if (o.len_ != len_) throw std::invalid_argument("BitVector xor: length mismatch");
        for (size_t k = 0; k < w_.size(); ++k) w_[k] ^= o.w_[k];
    }

    size_t count_ones() const;
    bool operator==(const BitVector& o) const { return len_ == o.len_ && w_ == o.w_; }

    // Clears any bits beyond len_ in the last word; fill paths use this after
    // writing whole words.
    void mask_tail() {
        if (len_ % 64 != 0 && !w_.empty())
            w_.back() &= (uint64_t{1} << (len_ % 64)) - 1;
    }

  private:
    size_t len_ = 0;
    std::vector<uint64_t> w_;
};

// Row-major packed bit matrix with amortized row append; decoders grow one of
// these as receptions arrive and hand it to solve() once.
class BitMatrix {
  public:
    BitMatrix() = default;
    BitMatrix(size_t rows, size_t cols)
        : rows_(rows), cols_(cols), width_(words_for_bits(cols)), data_(rows * width_, 0) {}

    static BitMatrix identity(size_t n);

    size_t rows() const { return rows_; }
    size_t cols() const { return cols_; }
    size_t width() const { return width_; }

    uint64_t* row(size_t r) { return data_.data() + r * width_; }
    const uint64_t* row(size_t r) const { return data_.data() + r * width_; }

    bool get(size_t r, size_t c) const { return (row(r)[c / 64] >> (c % 64)) & 1u; }
    void set(size_t r, size_t c, bool v) {
        const uint64_t bit = uint64_t{1} << (c % 64);
        if (v) row(r)[c / 64] |= bit; else row(r)[c / 64] &= ~bit;
    }

    void reserve_rows(size_t n) { data_.reserve(n * width_); }

    // All append paths return the index of the new row.
    size_t append_zero_row();
    size_t append_row(const BitVector& v);              // v.size() == cols
    size_t append_unit_row(size_t c);                   // standard basis e_c
    size_t append_random_row(Rng& rng);                 // i.i.d. Ber(1/2) bits

    private:
    size_t rows_ = 0;
    size_t cols_ = 0;
    size_t width_ = 0;
    std::vector<uint64_t> data_;
};

// coefficients * x = rhs over GF(2), one rhs bit per row.
struct LinearSystem {
    BitMatrix coefficients;
    BitVector rhs;

    LinearSystem() = default;
    explicit LinearSystem(size_t cols) : coefficients(0, cols), rhs(0) {}
    size_t rows() const { return coefficients.rows(); }
    size_t cols() const { return coefficients.cols(); }

    // Appends one equation; the rhs vector is re-sized to follow the matrix.
    void add_equation(const BitVector& coeffs, bool value);
    void add_unit_equation(size_t col, bool value);
};

// Expected decode outcomes, not faults: protocols legitimately probe systems
// that may be short of rank (Underdetermined) and tests construct
// contradictory ones (Inconsistent).
struct Underdetermined {};
struct Inconsistent {};
using SolveResult = std::variant<BitVector, Underdetermined, Inconsistent>;

inline bool solved(const SolveResult& r) { return std::holds_alternative<BitVector>(r); }
inline const BitVector& solution(const SolveResult& r) { return std::get<BitVector>(r); }

BitVector random_vector(size_t len, Rng& rng);

// Inner product over GF(2): XOR of msg bits selected by coeffs.
bool dot(const BitVector& coeffs, const BitVector& msg);
bool dot_words(const uint64_t* a, const uint64_t* b, size_t words);

// Keeps v's bits at positions where mask is set, packed in mask order.
// out_len must equal mask.count_ones(); decoders use this to project a
// coefficient row onto the coordinates that are still unknown.
BitVector compress_bits(const BitVector& v, const BitVector& mask, size_t out_len);

// Inverse placement: spreads packed's bits onto the set positions of mask,
// zeros elsewhere. packed.length() must equal mask.count_ones().
BitVector expand_bits(const BitVector& packed, const BitVector& mask);

size_t rank(const BitMatrix& m);

// Unique solution when rank == cols; Underdetermined when rank < cols and the
// system is consistent; Inconsistent otherwise. Forward elimination with
// first-set-bit pivoting, ties broken by lowest row index, so repeated runs
// are bit-identical.
SolveResult solve(const LinearSystem& sys);

}  // namespace becsim
