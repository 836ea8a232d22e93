// GF(2) linear algebra on bit-packed rows. The eliminator below processes
// 64-column panels: it finds pivots with a one-word shadow of each row, then
// clears the panel from all remaining rows via eight 256-entry XOR tables per
// sweep, so each row is loaded once per panel instead of once per pivot.
#include "becsim/gf2.hpp"

#include <algorithm>
#include <bit>
#include <cstring>

#if defined(__BMI2__)
#include <immintrin.h>
#endif

namespace becsim {

size_t BitVector::count_ones() const {
    size_t n = 0;
    for (uint64_t word : w_) n += std::popcount(word);
    return n;
}

BitMatrix BitMatrix::identity(size_t n) {
    BitMatrix m(n, n);
    for (size_t i = 0; i < n; ++i) m.set(i, i, true);
    return m;
}

size_t BitMatrix::append_zero_row() {
    data_.resize(data_.size() + width_, 0);
    return rows_++;
}

size_t BitMatrix::append_row(const BitVector& v) {
    if (v.size() != cols_) throw std::invalid_argument("append_row: column mismatch");
    const size_t r = append_zero_row();
    std::memcpy(row(r), v.words(), width_ * sizeof(uint64_t));
    return r;
}

size_t BitMatrix::append_unit_row(size_t c) {
    const size_t r = append_zero_row();
    set(r, c, true);
    return r;
}

size_t BitMatrix::append_random_row(Rng& rng) {
    const size_t r = append_zero_row();
    uint64_t* p = row(r);
    for (size_t k = 0; k < width_; ++k) p[k] = rng.bits64();
    if (cols_ % 64 != 0) p[width_ - 1] &= (uint64_t{1} << (cols_ % 64)) - 1;
    return r;
}

void LinearSystem::add_equation(const BitVector& coeffs, bool value) {
    coefficients.append_row(coeffs);
    // rhs grows in lockstep with the matrix.
    BitVector grown(coefficients.rows());
    std::memcpy(grown.words(), rhs.words(), rhs.word_count() * sizeof(uint64_t));
    grown.set(coefficients.rows() - 1, value);
    rhs = std::move(grown);
}

void LinearSystem::add_unit_equation(size_t col, bool value) {
    coefficients.append_unit_row(col);
    BitVector grown(coefficients.rows());
    std::memcpy(grown.words(), rhs.words(), rhs.word_count() * sizeof(uint64_t));
    grown.set(coefficients.rows() - 1, value);
    rhs = std::move(grown);
}

BitVector random_vector(size_t len, Rng& rng) {
    BitVector v(len);
    uint64_t* w = v.words();
    for (size_t k = 0; k < v.word_count(); ++k) w[k] = rng.bits64();
    v.mask_tail();
    return v;
}

bool dot_words(const uint64_t* a, const uint64_t* b, size_t words) {
    uint64_t acc = 0;
    for (size_t k = 0; k < words; ++k) acc ^= a[k] & b[k];
    return std::popcount(acc) & 1;
}

bool dot(const BitVector& coeffs, const BitVector& msg) {
    if (coeffs.size() != msg.size()) throw std::invalid_argument("dot: length mismatch");
    return dot_words(coeffs.words(), msg.words(), coeffs.word_count());
}

namespace {

// Bits [c0, c0+k) of a packed row as one word, k <= 64.
inline uint64_t extract_bits(const uint64_t* row, size_t c0, unsigned k) {
    const size_t wi = c0 >> 6;
    const unsigned off = c0 & 63;
    uint64_t x = row[wi] >> off;
    if (off != 0 && off + k > 64) x |= row[wi + 1] << (64 - off);
    return k == 64 ? x : x & ((uint64_t{1} << k) - 1);
}

inline uint64_t gather_bits(uint64_t slice, uint64_t mask) {
#if defined(__BMI2__)
    return _pext_u64(slice, mask);
#else
    uint64_t out = 0, bit = 1;
    while (mask) {
        const uint64_t low = mask & -mask;
        if (slice & low) out |= bit;
        bit <<= 1;
        mask ^= low;
    }
    return out;
#endif
}

inline uint64_t scatter_bits(uint64_t packed, uint64_t mask) {
#if defined(__BMI2__)
    return _pdep_u64(packed, mask);
#else
    uint64_t out = 0;
    while (mask) {
        const uint64_t low = mask & -mask;
        if (packed & 1) out |= low;
        packed >>= 1;
        mask ^= low;
    }
    return out;
#endif
}

inline void xor_rows(uint64_t* __restrict dst, const uint64_t* __restrict src, size_t words) {
    for (size_t k = 0; k < words; ++k) dst[k] ^= src[k];
}

inline void xor_rows4(uint64_t* __restrict dst, const uint64_t* __restrict s0,
                      const uint64_t* __restrict s1, const uint64_t* __restrict s2,
                      const uint64_t* __restrict s3, size_t words) {
    for (size_t k = 0; k < words; ++k) dst[k] ^= s0[k] ^ s1[k] ^ s2[k] ^ s3[k];
}

inline void xor_rows3(uint64_t* __restrict dst, const uint64_t* __restrict s0,
                      const uint64_t* __restrict s1, const uint64_t* __restrict s2,
                      size_t words) {
    for (size_t k = 0; k < words; ++k) dst[k] ^= s0[k] ^ s1[k] ^ s2[k];
}

inline void xor_rows2(uint64_t* __restrict dst, const uint64_t* __restrict s0,
                      const uint64_t* __restrict s1, size_t words) {
    for (size_t k = 0; k < words; ++k) dst[k] ^= s0[k] ^ s1[k];
}

inline void xor_into(uint64_t* __restrict dst, const uint64_t* __restrict a,
                     const uint64_t* __restrict b, size_t words) {
    for (size_t k = 0; k < words; ++k) dst[k] = a[k] ^ b[k];
}

inline void xor_scatter4(uint64_t* __restrict d0, uint64_t* __restrict d1,
                         uint64_t* __restrict d2, uint64_t* __restrict d3,
                         const uint64_t* __restrict src, size_t words) {
    for (size_t k = 0; k < words; ++k) {
        const uint64_t h = src[k];
        d0[k] ^= h;
        d1[k] ^= h;
        d2[k] ^= h;
        d3[k] ^= h;
    }
}

// In-place transpose of a 64x64 bit block: bit j of word i moves to bit i of
// word j (bit 0 is the lowest-numbered column throughout).
inline void transpose64(uint64_t a[64]) {
    uint64_t m = 0x00000000FFFFFFFFULL;
    for (unsigned j = 32; j != 0; j >>= 1, m ^= m << j) {
        for (unsigned i = 0; i < 64; i = (i + j + 1) & ~j) {
            const uint64_t t = ((a[i] >> j) ^ a[i + j]) & m;
            a[i + j] ^= t;
            a[i] ^= t << j;
        }
    }
}

// Forward elimination over an augmented row store. Pivoting is first set bit
// per column, lowest row index on ties, which pins the whole reduction for
// reproducibility. Panels that fail to pivot every column (possible only when
// the matrix is rank-deficient) are retried in further passes so the final
// pivot count is the true rank.
//
// Panels span up to kPanelCols columns so each remaining row is streamed
// through memory once per panel rather than once per pivot; within a panel,
// the pivot search runs on bit-transposed copies of the panel words, and the
// panel is then cleared from all remaining rows in one table-driven sweep.
constexpr unsigned kPanelCols = 256;
constexpr unsigned kPanelWords = kPanelCols / 64;
constexpr unsigned kMaxChunks = kPanelCols / 8 + kPanelWords;

class GaussEngine {
  public:
    // Row stride is padded to a multiple of eight words and the store is
    // 64-byte aligned, so an aligned-grid tile of any row occupies exactly one
    // cache line. The pad words start zero and stay zero under row XORs.
    GaussEngine(size_t rows, size_t acols, size_t coef_cols)
        : nr_(rows), nc_(coef_cols), acols_(acols),
          w_((words_for_bits(std::max<size_t>(acols, 1)) + 7) & ~size_t{7}),
          data_(rows * w_ + 7, 0), ord_(rows), col_has_pivot_(coef_cols, false) {
        base_ = data_.data();
        base_ += (64 - (reinterpret_cast<uintptr_t>(base_) & 63)) / 8 & 7;
        for (size_t i = 0; i < rows; ++i) ord_[i] = static_cast<uint32_t>(i);
    }

    uint64_t* raw_row(size_t r) { return base_ + r * w_; }
    const uint64_t* logical_row(size_t li) const { return base_ + ord_[li] * w_; }
    size_t row_words() const { return w_; }

    size_t rank() const { return piv_col_.size(); }
    size_t front() const { return front_; }
    const std::vector<uint32_t>& pivot_cols() const { return piv_col_; }
    const std::vector<uint32_t>& pivot_phys_rows() const { return piv_phys_; }
    bool had_open_column() const { return min_open_col_ != SIZE_MAX; }

    void run() {
        if (nr_ == 0 || nc_ == 0) return;
        planes_.resize(static_cast<size_t>(kPanelWords) * nr_);
        bool progressed = true;
        while (progressed && rank() < std::min(nr_, nc_)) {
            progressed = false;
            for (size_t c0 = 0; c0 < nc_ && front_ < nr_ && rank() < nc_; c0 += kPanelCols)
                progressed |= process_panel(
                    c0, static_cast<unsigned>(std::min<size_t>(kPanelCols, nc_ - c0)));
        }
    }

  private:
    // Panel-column slice of a stored row, kPanelWords words. Panels start on
    // word boundaries, so this is a masked copy.
    void load_slice(const uint64_t* row, size_t w0, unsigned k, uint64_t* out) const {
        const unsigned sw = (k + 63) / 64;
        for (unsigned j = 0; j < sw; ++j) out[j] = row[w0 + j];
        if (k % 64 != 0) out[sw - 1] &= (uint64_t{1} << (k % 64)) - 1;
        for (unsigned j = sw; j < kPanelWords; ++j) out[j] = 0;
    }

    bool process_panel(size_t c0, unsigned k) {
        const unsigned sw = (k + 63) / 64;
        const size_t w0 = c0 >> 6;

        // The panel slice of rows [front_, nr_) is kept plane-major: plane s
        // holds word s of every row's slice. The pivot hunt for a stage runs
        // on a transposed copy of its plane, where column b over the
        // candidate rows is a contiguous bit vector. Probing a column is then
        // a first-set-bit scan, and reducing every row that carries column b
        // is one XOR of that bit vector into the later probe columns, instead
        // of a pointer walk over the hit rows.
        for (size_t li = front_; li < nr_; ++li) {
            const uint64_t* row = logical_row(li);
            for (unsigned s = 0; s < sw; ++s) planes_[s * nr_ + li] = row[w0 + s];
        }
        if (k % 64 != 0) {
            const uint64_t m = (uint64_t{1} << (k % 64)) - 1;
            for (size_t li = front_; li < nr_; ++li) planes_[(sw - 1) * nr_ + li] &= m;
        }

        unsigned found = 0;
        uint32_t bits[kPanelCols];
        for (unsigned stage = 0; stage < sw && front_ + found < nr_; ++stage) {
            const unsigned kk = std::min(64u, k - stage * 64);
            const size_t rbase = front_ + found;
            const size_t rows = nr_ - rbase;
            const size_t rw = (rows + 63) / 64;
            cv_.resize(64 * rw);
            hv_.resize(64 * rw);
            hitbuf_.resize(rw);
            avail_.assign(rw, ~uint64_t{0});
            if (rows % 64 != 0) avail_[rw - 1] = (uint64_t{1} << (rows % 64)) - 1;

            const uint64_t* plane = &planes_[stage * nr_ + rbase];
            for (size_t blk = 0; blk < rw; ++blk) {
                uint64_t tmp[64];
                const size_t lim = std::min<size_t>(64, rows - blk * 64);
                for (size_t i = 0; i < lim; ++i) tmp[i] = plane[blk * 64 + i];
                for (size_t i = lim; i < 64; ++i) tmp[i] = 0;
                transpose64(tmp);
                for (unsigned b = 0; b < 64; ++b) cv_[b * rw + blk] = tmp[b];
            }

            // A claimed row keeps its bits in the columns; avail_ masks it out
            // of probes and reductions, which plays the role of moving it to
            // the front. hv_ accumulates, per pivot, the set of rows whose
            // trailing slice words still owe that pivot's combination.
            unsigned stage_found = 0;
            size_t pivlog[64];
            for (unsigned b = 0; b < kk; ++b) {
                uint64_t* col = &cv_[b * rw];
                size_t hw = SIZE_MAX;
                for (size_t i = 0; i < rw; ++i)
                    if (col[i] & avail_[i]) { hw = i; break; }
                if (hw == SIZE_MAX) {
                    if (stage_found < rows && !col_has_pivot_[c0 + stage * 64 + b])
                        min_open_col_ = std::min(min_open_col_, c0 + stage * 64 + b);
                    continue;
                }
                const unsigned hb =
                    static_cast<unsigned>(std::countr_zero(col[hw] & avail_[hw]));
                avail_[hw] &= ~(uint64_t{1} << hb);
                for (size_t i = 0; i < rw; ++i) hitbuf_[i] = col[i] & avail_[i];

                // Gather the pivot row's probe word from the columns, and the
                // combination it owes (its own hv_ memberships plus itself).
                uint64_t pvw = 0;
                for (unsigned c = b + 1; c < kk; ++c)
                    pvw |= ((cv_[c * rw + hw] >> hb) & 1) << c;
                uint64_t fr = uint64_t{1} << stage_found;
                for (unsigned p = 0; p < stage_found; ++p)
                    fr ^= ((hv_[p * rw + hw] >> hb) & 1) << p;
                std::memset(&hv_[size_t{stage_found} * rw], 0, rw * sizeof(uint64_t));
                uint64_t* dests[128];
                unsigned nd = 0;
                for (unsigned c = b + 1; c < kk; ++c)
                    if ((pvw >> c) & 1) dests[nd++] = &cv_[c * rw];
                for (unsigned p = 0; p <= stage_found; ++p)
                    if ((fr >> p) & 1) dests[nd++] = &hv_[p * rw];
                unsigned d = 0;
                for (; d + 4 <= nd; d += 4)
                    xor_scatter4(dests[d], dests[d + 1], dests[d + 2],
                                 dests[d + 3], hitbuf_.data(), rw);
                for (; d < nd; ++d) xor_rows(dests[d], hitbuf_.data(), rw);

                pivlog[stage_found] = rbase + hw * 64 + hb;
                bits[found++] = static_cast<uint32_t>(stage * 64 + b);
                ++stage_found;
            }
            if (stage_found == 0) continue;

            // Stage epilogue: untranspose hv_ into per-row combination masks
            // and replay them onto the trailing planes in one table-driven
            // pass (tables hold combinations of the pivots' stage-entry
            // trailing words). Then compact the pivot rows to the front of
            // the candidate range; the current and earlier planes are dead,
            // so only ord_ and the trailing planes swap.
            const unsigned tws = sw - stage - 1;
            if (tws > 0) {
                hist_.resize(nr_);
                for (size_t blk = 0; blk < rw; ++blk) {
                    uint64_t tmp[64];
                    for (unsigned p = 0; p < stage_found; ++p) tmp[p] = hv_[p * rw + blk];
                    for (unsigned p = stage_found; p < 64; ++p) tmp[p] = 0;
                    transpose64(tmp);
                    const size_t lim = std::min<size_t>(64, rows - blk * 64);
                    for (size_t i = 0; i < lim; ++i) hist_[rbase + blk * 64 + i] = tmp[i];
                }
                const unsigned nchunks = (stage_found + 7) / 8;
                stage_tables_.resize(static_cast<size_t>(nchunks) * 256 * tws);
                for (unsigned t = 0; t < nchunks; ++t) {
                    const unsigned base = t * 8, cnt = std::min(8u, stage_found - base);
                    uint64_t* tbl = stage_tables_.data() + static_cast<size_t>(t) * 256 * tws;
                    std::memset(tbl, 0, tws * sizeof(uint64_t));
                    for (unsigned g = 1; g < (1u << cnt); ++g) {
                        const unsigned j = std::countr_zero(g);
                        const uint64_t* prev = tbl + static_cast<size_t>(g ^ (1u << j)) * tws;
                        uint64_t* cur = tbl + static_cast<size_t>(g) * tws;
                        const size_t pl = pivlog[base + j];
                        for (unsigned m = 0; m < tws; ++m)
                            cur[m] = prev[m] ^ planes_[(stage + 1 + m) * nr_ + pl];
                    }
                }
                for (size_t li = rbase; li < nr_; ++li) {
                    const uint64_t h = hist_[li];
                    if (h == 0) continue;
                    uint64_t acc[kPanelWords - 1] = {};
                    for (unsigned t = 0; t < nchunks; ++t) {
                        const unsigned idx = (h >> (8 * t)) & 0xff;
                        if (idx) {
                            const uint64_t* e =
                                stage_tables_.data() + (static_cast<size_t>(t) * 256 + idx) * tws;
                            for (unsigned m = 0; m < tws; ++m) acc[m] ^= e[m];
                        }
                    }
                    for (unsigned m = 0; m < tws; ++m)
                        planes_[(stage + 1 + m) * nr_ + li] ^= acc[m];
                }
            }
            for (unsigned i = 0; i < stage_found; ++i) {
                const size_t slot = rbase + i;
                const size_t pos = pivlog[i];
                if (pos == slot) continue;
                std::swap(ord_[slot], ord_[pos]);
                for (unsigned s = stage + 1; s < sw; ++s)
                    std::swap(planes_[s * nr_ + slot], planes_[s * nr_ + pos]);
                for (unsigned j = i + 1; j < stage_found; ++j)
                    if (pivlog[j] == slot) { pivlog[j] = pos; break; }
            }
        }
        if (found == 0) return false;

        // Materialize the elimination on the pivot rows themselves: a forward
        // pass reproduces the shadow reductions, a backward pass clears the
        // later panel bits, leaving each pivot row with a unit pattern on the
        // pivot columns so the sweep tables stay index-exact.
        const size_t tw0 = std::min(min_open_col_, c0) >> 6;
        const size_t ws = w_ - tw0;
        for (unsigned i = 0; i < found; ++i) {
            uint64_t* ri = raw(front_ + i);
            for (unsigned j = 0; j < i; ++j)
                if (ri[(c0 + bits[j]) >> 6] & (uint64_t{1} << ((c0 + bits[j]) & 63)))
                    xor_rows(ri + tw0, raw(front_ + j) + tw0, ws);
        }
        for (unsigned i = found; i-- > 0;) {
            uint64_t* ri = raw(front_ + i);
            for (unsigned j = i + 1; j < found; ++j)
                if (ri[(c0 + bits[j]) >> 6] & (uint64_t{1} << ((c0 + bits[j]) & 63)))
                    xor_rows(ri + tw0, raw(front_ + j) + tw0, ws);
        }
        for (unsigned i = 0; i < found; ++i) {
            piv_col_.push_back(static_cast<uint32_t>(c0 + bits[i]));
            piv_phys_.push_back(ord_[front_ + i]);
            col_has_pivot_[c0 + bits[i]] = true;
        }

        const size_t new_front = front_ + found;
        if (rank() < nc_ && new_front < nr_) sweep(c0, k, found, bits, tw0, ws);
        front_ = new_front;
        return true;
    }

    // Clear the panel columns from every remaining row in one streaming pass:
    // Gray-code tables over chunks of up to eight pivot rows, all chunk rows
    // fused into each target row. Chunks never straddle slice words, so one
    // pext per chunk maps a row's pivot-column bits to its table index.
    void sweep(size_t c0, unsigned k, unsigned found, const uint32_t* bits, size_t tw0,
               size_t ws) {
        unsigned chunk_first[kMaxChunks], chunk_cnt[kMaxChunks], chunk_word[kMaxChunks];
        uint64_t chunk_mask[kMaxChunks];
        unsigned chunks = 0;
        for (unsigned i = 0; i < found;) {
            const unsigned bw = bits[i] >> 6;
            unsigned n = 1;
            while (n < 8 && i + n < found && (bits[i + n] >> 6) == bw) ++n;
            chunk_first[chunks] = i;
            chunk_cnt[chunks] = n;
            chunk_word[chunks] = bw;
            uint64_t mask = 0;
            for (unsigned j = 0; j < n; ++j) mask |= uint64_t{1} << (bits[i + j] & 63);
            chunk_mask[chunks++] = mask;
            i += n;
        }

        // A full table set is chunks * 256 * ws words; once that outgrows L2
        // the per-row entry reads throttle on L3 bandwidth, so large panels
        // run the tile-blocked variant whose working set stays cache-resident.
        if (static_cast<size_t>(chunks) * 256 * ws * sizeof(uint64_t) > (size_t{1} << 21)) {
            sweep_tiled(c0, k, found, chunks, chunk_first, chunk_cnt, chunk_word,
                        chunk_mask, tw0, ws);
            return;
        }

        tables_.resize(static_cast<size_t>(chunks) * 256 * ws);
        for (unsigned t = 0; t < chunks; ++t) {
            uint64_t* tbl = tables_.data() + static_cast<size_t>(t) * 256 * ws;
            std::memset(tbl, 0, ws * sizeof(uint64_t));
            for (unsigned g = 1; g < (1u << chunk_cnt[t]); ++g) {
                const unsigned j = std::countr_zero(g);
                const uint64_t* prev = tbl + static_cast<size_t>(g ^ (1u << j)) * ws;
                uint64_t* cur = tbl + static_cast<size_t>(g) * ws;
                xor_into(cur, prev, raw(front_ + chunk_first[t] + j) + tw0, ws);
            }
        }

        const size_t w0 = c0 >> 6;
        for (size_t li = front_ + found; li < nr_; ++li) {
            uint64_t* row = base_ + ord_[li] * w_;
            uint64_t slice[kPanelWords];
            load_slice(row, w0, k, slice);

            const uint64_t* src[kMaxChunks];
            unsigned cnt = 0;
            for (unsigned t = 0; t < chunks; ++t) {
                const uint64_t idx = gather_bits(slice[chunk_word[t]], chunk_mask[t]);
                if (idx) src[cnt++] = tables_.data() + (static_cast<size_t>(t) * 256 + idx) * ws;
            }
            if (cnt == 0) continue;
            uint64_t* dst = row + tw0;
            unsigned j = 0;
            for (; j + 4 <= cnt; j += 4)
                xor_rows4(dst, src[j], src[j + 1], src[j + 2], src[j + 3], ws);
            switch (cnt - j) {
                case 3: xor_rows3(dst, src[j], src[j + 1], src[j + 2], ws); break;
                case 2: xor_rows2(dst, src[j], src[j + 1], ws); break;
                case 1: xor_rows(dst, src[j], ws); break;
                default: break;
            }
        }
    }

    // Tile-blocked sweep: table indices are computed once per row, then the
    // trailing range is processed in 8-word tiles. Each tile rebuilds the
    // chunk tables restricted to its columns as one contiguous block, small
    // enough that the per-row entry reads hit L2, and the per-row combination
    // accumulates in registers before touching the destination.
    void sweep_tiled(size_t c0, unsigned k, unsigned found, unsigned chunks,
                     const unsigned* chunk_first, const unsigned* chunk_cnt,
                     const unsigned* chunk_word, const uint64_t* chunk_mask, size_t tw0,
                     size_t ws) {
        constexpr size_t kTile = 8;
        const size_t w0 = c0 >> 6;
        const size_t r0 = front_ + found;
        const size_t nrem = nr_ - r0;

        // The offset of a row's table entry inside a tile block does not
        // depend on the tile, so each row's nonzero entries are flattened to
        // one offset list up front and every tile pass replays it.
        idxbuf_.resize(nrem * chunks);
        cntbuf_.resize(nrem);
        for (size_t r = 0; r < nrem; ++r) {
            uint64_t slice[kPanelWords];
            load_slice(base_ + ord_[r0 + r] * w_, w0, k, slice);
            uint16_t* offs = &idxbuf_[r * chunks];
            unsigned cnt = 0;
            for (unsigned t = 0; t < chunks; ++t) {
                const uint64_t idx = gather_bits(slice[chunk_word[t]], chunk_mask[t]);
                if (idx) offs[cnt++] = static_cast<uint16_t>(t * 256 + idx);
            }
            cntbuf_[r] = static_cast<uint8_t>(cnt);
        }

        tables_.resize(static_cast<size_t>(chunks) * 256 * kTile + 8);
        uint64_t* tb = tables_.data();
        tb += (64 - (reinterpret_cast<uintptr_t>(tb) & 63)) / 8 & 7;

        // Tiles are anchored to the 64-byte grid of the row store, so after a
        // possible short leading tile every destination segment is one line.
        for (size_t toff = 0; toff < ws;) {
            const size_t tlen =
                std::min(kTile - ((tw0 + toff) & (kTile - 1)), ws - toff);
            for (unsigned t = 0; t < chunks; ++t) {
                uint64_t* tbl = tb + static_cast<size_t>(t) * 256 * kTile;
                std::memset(tbl, 0, kTile * sizeof(uint64_t));
                for (unsigned g = 1; g < (1u << chunk_cnt[t]); ++g) {
                    const unsigned j = std::countr_zero(g);
                    const uint64_t* prev = tbl + static_cast<size_t>(g ^ (1u << j)) * kTile;
                    uint64_t* cur = tbl + static_cast<size_t>(g) * kTile;
                    const uint64_t* piv = raw(front_ + chunk_first[t] + j) + tw0 + toff;
                    for (size_t m = 0; m < tlen; ++m) cur[m] = prev[m] ^ piv[m];
                }
            }

            for (size_t r = 0; r < nrem; ++r) {
                if (r + 8 < nrem)
                    __builtin_prefetch(base_ + ord_[r0 + r + 8] * w_ + tw0 + toff, 1, 3);
                const unsigned cnt = cntbuf_[r];
                if (cnt == 0) continue;
                const uint16_t* offs = &idxbuf_[r * chunks];
                uint64_t* dst = base_ + ord_[r0 + r] * w_ + tw0 + toff;
                if (tlen == kTile) {
                    uint64_t acc[kTile] = {};
                    for (unsigned j = 0; j < cnt; ++j) {
                        const uint64_t* s = tb + size_t{offs[j]} * kTile;
                        for (size_t m = 0; m < kTile; ++m) acc[m] ^= s[m];
                    }
                    for (size_t m = 0; m < kTile; ++m) dst[m] ^= acc[m];
                } else {
                    for (unsigned j = 0; j < cnt; ++j) {
                        const uint64_t* s = tb + size_t{offs[j]} * kTile;
                        for (size_t m = 0; m < tlen; ++m) dst[m] ^= s[m];
                    }
                }
            }
            toff += tlen;
        }
    }

    uint64_t* raw(size_t li) { return base_ + ord_[li] * w_; }

    size_t nr_, nc_, acols_, w_;
    std::vector<uint64_t> data_;
    uint64_t* base_ = nullptr;
    std::vector<uint32_t> ord_;
    std::vector<uint64_t> planes_;
    std::vector<uint64_t> cv_, hv_, hitbuf_, avail_;
    std::vector<uint64_t> hist_;
    std::vector<uint64_t> stage_tables_;
    std::vector<uint64_t> tables_;
    std::vector<uint16_t> idxbuf_;
    std::vector<uint8_t> cntbuf_;
    std::vector<uint32_t> piv_col_;
    std::vector<uint32_t> piv_phys_;
    std::vector<bool> col_has_pivot_;
    size_t front_ = 0;
    size_t min_open_col_ = SIZE_MAX;
};

}  // namespace

BitVector compress_bits(const BitVector& v, const BitVector& mask, size_t out_len) {
    if (v.size() != mask.size())
        throw std::invalid_argument("compress_bits: length mismatch");
    BitVector out(out_len);
    uint64_t* ow = out.words();
    size_t cursor = 0;
    for (size_t k = 0; k < mask.word_count(); ++k) {
        const uint64_t mw = mask.words()[k];
        if (mw == 0) continue;
        const uint64_t bits = gather_bits(v.words()[k], mw);
        const unsigned n = std::popcount(mw);
        if (cursor + n > out_len)
            throw std::invalid_argument("compress_bits: out_len below mask weight");
        const size_t wi = cursor >> 6;
        const unsigned off = cursor & 63;
        ow[wi] |= bits << off;
        if (off != 0 && off + n > 64) ow[wi + 1] |= bits >> (64 - off);
        cursor += n;
    }
    if (cursor != out_len)
        throw std::invalid_argument("compress_bits: out_len above mask weight");
    return out;
}

BitVector expand_bits(const BitVector& packed, const BitVector& mask) {
    BitVector out(mask.size());
    uint64_t* ow = out.words();
    size_t cursor = 0;
    for (size_t k = 0; k < mask.word_count(); ++k) {
        const uint64_t mw = mask.words()[k];
        if (mw == 0) continue;
        const unsigned n = std::popcount(mw);
        if (cursor + n > packed.size())
            throw std::invalid_argument("expand_bits: packed shorter than mask weight");
        ow[k] = scatter_bits(extract_bits(packed.words(), cursor, n), mw);
        cursor += n;
    }
    if (cursor != packed.size())
        throw std::invalid_argument("expand_bits: packed longer than mask weight");
    return out;
}

size_t rank(const BitMatrix& m) {
    GaussEngine eng(m.rows(), m.cols(), m.cols());
    for (size_t r = 0; r < m.rows(); ++r)
        std::memcpy(eng.raw_row(r), m.row(r), m.width() * sizeof(uint64_t));
    eng.run();
    return eng.rank();
}

SolveResult solve(const LinearSystem& sys) {
    const size_t nr = sys.rows(), nc = sys.cols();
    if (sys.rhs.size() != nr) throw std::invalid_argument("solve: rhs/rows mismatch");

    GaussEngine eng(nr, nc + 1, nc);
    const size_t wa = sys.coefficients.width();
    for (size_t r = 0; r < nr; ++r) {
        uint64_t* dst = eng.raw_row(r);
        std::memcpy(dst, sys.coefficients.row(r), wa * sizeof(uint64_t));
        if (sys.rhs.get(r)) dst[nc >> 6] |= uint64_t{1} << (nc & 63);
    }
    eng.run();

    if (eng.rank() < nc) {
        // Exhausted passes leave every leftover row with a zero coefficient
        // part; a surviving rhs bit is a contradiction witness.
        for (size_t li = eng.front(); li < nr; ++li)
            if (eng.logical_row(li)[nc >> 6] & (uint64_t{1} << (nc & 63)))
                return Inconsistent{};
        return Underdetermined{};
    }

    // Full column rank: pivot columns are exactly 0..nc-1 in order, so plain
    // back-substitution over the pivot rows applies.
    BitVector x(nc);
    const auto& cols = eng.pivot_cols();
    const auto& rows = eng.pivot_phys_rows();
    for (size_t i = nc; i-- > 0;) {
        const uint64_t* r = eng.raw_row(rows[i]);
        bool v = dot_words(r, x.words(), x.word_count());
        v ^= (r[nc >> 6] >> (nc & 63)) & 1;
        x.set(cols[i], v);
    }

    // Any rows never consumed as pivots are combinations of original
    // equations; verifying them against x settles consistency exactly.
    for (size_t li = eng.front(); li < nr; ++li) {
        const uint64_t* r = eng.logical_row(li);
        bool v = dot_words(r, x.words(), x.word_count());
        if (v != (((r[nc >> 6] >> (nc & 63)) & 1) != 0)) return Inconsistent{};
    }
    return x;
}

}  // namespace becsim
