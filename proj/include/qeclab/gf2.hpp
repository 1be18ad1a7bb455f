#pragma once

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace qeclab {

/// Dense bit vector over GF(2), word-packed. Bits beyond size() are kept zero
/// so that word-wise comparison and XOR are valid.
class BitVector {
  public:
    BitVector() = default;

    explicit BitVector(std::size_t n) : size_(n), words_((n + 63) / 64, 0) {}

    static BitVector from_string(std::string_view s) {
        BitVector v(s.size());
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (s[i] == '1') {
                v.set(i, true);
            } else if (s[i] != '0') {
                throw std::invalid_argument("bit string may contain only '0' and '1'");
            }
        }
        return v;
    }

    std::size_t size() const {
        return size_;
    }

    bool get(std::size_t i) const {
        return (words_[i >> 6] >> (i & 63)) & 1;
    }

    void set(std::size_t i, bool v) {
        uint64_t mask = uint64_t{1} << (i & 63);
        if (v) {
            words_[i >> 6] |= mask;
        } else {
            words_[i >> 6] &= ~mask;
        }
    }

    /// Number of set bits.
    std::size_t count() const {
        std::size_t c = 0;
        for (uint64_t w : words_) {
            c += static_cast<std::size_t>(__builtin_popcountll(w));
        }
        return c;
    }

    bool any() const {
        for (uint64_t w : words_) {
            if (w) {
                return true;
            }
        }
        return false;
    }

    BitVector& operator^=(const BitVector& o) {
        if (o.size_ != size_) {
            throw std::invalid_argument("bit vector length mismatch");
        }
        for (std::size_t i = 0; i < words_.size(); ++i) {
            words_[i] ^= o.words_[i];
        }
        return *this;
    }

    friend BitVector operator^(BitVector a, const BitVector& b) {
        a ^= b;
        return a;
    }

    bool operator==(const BitVector&) const = default;

    /// Parity of the AND of two equal-length vectors (mod-2 dot product).
    static int dot(const BitVector& a, const BitVector& b) {
        if (a.size_ != b.size_) {
            throw std::invalid_argument("bit vector length mismatch");
        }
        uint64_t acc = 0;
        for (std::size_t i = 0; i < a.words_.size(); ++i) {
            acc ^= a.words_[i] & b.words_[i];
        }
        return __builtin_popcountll(acc) & 1;
    }

    std::string to_string() const {
        std::string s(size_, '0');
        for (std::size_t i = 0; i < size_; ++i) {
            if (get(i)) {
                s[i] = '1';
            }
        }
        return s;
    }

    /// Pack into an integer key, bit i of the vector at bit i of the result.
    uint64_t to_key() const {
        if (size_ > 64) {
            throw std::invalid_argument("bit vector too long for integer key");
        }
        return words_.empty() ? 0 : words_[0];
    }

    std::span<const uint64_t> words() const {
        return words_;
    }

  private:
    std::size_t size_ = 0;
    std::vector<uint64_t> words_;
};

/// Dense row-major matrix over GF(2) with word-packed rows. Immutable in all
/// module operations: every transform returns a fresh matrix.
class BinaryMatrix {
  public:
    BinaryMatrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), wpr_((cols + 63) / 64), words_(rows * wpr_, 0) {
        if (rows == 0 || cols == 0) {
            throw std::invalid_argument("matrix must have at least one row and one column");
        }
    }

    static BinaryMatrix identity(std::size_t n) {
        BinaryMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            m.set(i, i, true);
        }
        return m;
    }

    static BinaryMatrix from_rows(const std::vector<std::string>& rows) {
        if (rows.empty()) {
            throw std::invalid_argument("matrix must have at least one row and one column");
        }
        BinaryMatrix m(rows.size(), rows[0].size());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (rows[r].size() != m.cols_) {
                throw std::invalid_argument("ragged rows in matrix literal");
            }
            for (std::size_t c = 0; c < m.cols_; ++c) {
                if (rows[r][c] == '1') {
                    m.set(r, c, true);
                } else if (rows[r][c] != '0') {
                    throw std::invalid_argument("matrix rows may contain only '0' and '1'");
                }
            }
        }
        return m;
    }

    std::size_t rows() const {
        return rows_;
    }

    std::size_t cols() const {
        return cols_;
    }

    bool get(std::size_t r, std::size_t c) const {
        return (words_[r * wpr_ + (c >> 6)] >> (c & 63)) & 1;
    }

    void set(std::size_t r, std::size_t c, bool v) {
        uint64_t mask = uint64_t{1} << (c & 63);
        if (v) {
            words_[r * wpr_ + (c >> 6)] |= mask;
        } else {
            words_[r * wpr_ + (c >> 6)] &= ~mask;
        }
    }

    BitVector row(std::size_t r) const {
        BitVector v(cols_);
        for (std::size_t c = 0; c < cols_; ++c) {
            if (get(r, c)) {
                v.set(c, true);
            }
        }
        return v;
    }

    bool operator==(const BinaryMatrix&) const = default;

    std::vector<std::string> to_row_strings() const {
        std::vector<std::string> out;
        out.reserve(rows_);
        for (std::size_t r = 0; r < rows_; ++r) {
            out.push_back(row(r).to_string());
        }
        return out;
    }

    /// One '0'/'1' line per row, newline-terminated.
    std::string to_text() const {
        std::string out;
        for (std::size_t r = 0; r < rows_; ++r) {
            out += row(r).to_string();
            out += '\n';
        }
        return out;
    }

    /// Parses the text matrix format: '0'/'1' rows, blank lines and lines
    /// starting with '#' ignored.
    static BinaryMatrix parse_text(std::string_view text) {
        std::vector<std::string> rows;
        std::size_t pos = 0;
        while (pos <= text.size()) {
            std::size_t nl = text.find('\n', pos);
            std::string_view line =
                text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
            if (!line.empty() && line.back() == '\r') {
                line.remove_suffix(1);
            }
            if (!line.empty() && line.front() != '#') {
                rows.emplace_back(line);
            }
            if (nl == std::string_view::npos) {
                break;
            }
            pos = nl + 1;
        }
        if (rows.empty()) {
            throw std::invalid_argument("matrix text contains no rows");
        }
        return from_rows(rows);
    }

    // Internal helper for elimination-style algorithms: dst_row ^= src row.
    void xor_row(std::size_t dst, std::size_t src) {
        uint64_t* d = &words_[dst * wpr_];
        const uint64_t* s = &words_[src * wpr_];
        for (std::size_t i = 0; i < wpr_; ++i) {
            d[i] ^= s[i];
        }
    }

    void xor_row_from(std::size_t dst, const BinaryMatrix& other, std::size_t src) {
        if (other.cols_ != cols_) {
            throw std::invalid_argument("matrix column mismatch");
        }
        uint64_t* d = &words_[dst * wpr_];
        const uint64_t* s = &other.words_[src * wpr_];
        for (std::size_t i = 0; i < wpr_; ++i) {
            d[i] ^= s[i];
        }
    }

    void swap_rows(std::size_t a, std::size_t b) {
        if (a == b) {
            return;
        }
        for (std::size_t i = 0; i < wpr_; ++i) {
            std::swap(words_[a * wpr_ + i], words_[b * wpr_ + i]);
        }
    }

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::size_t wpr_ = 0;
    std::vector<uint64_t> words_;
};

/// Mod-2 matrix product. C[i][j] = sum_k A[i][k] B[k][j] (mod 2).
inline BinaryMatrix mat_mul(const BinaryMatrix& a, const BinaryMatrix& b) {
    if (a.cols() != b.rows()) {
        throw std::invalid_argument("mat_mul shape mismatch: " + std::to_string(a.cols()) +
                                    " != " + std::to_string(b.rows()));
    }
    BinaryMatrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            if (a.get(i, k)) {
                c.xor_row_from(i, b, k);
            }
        }
    }
    return c;
}

/// Kronecker (tensor) product: block (i,j) of the result is A[i][j] * B.
inline BinaryMatrix kron(const BinaryMatrix& a, const BinaryMatrix& b) {
    BinaryMatrix c(a.rows() * b.rows(), a.cols() * b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) {
            if (!a.get(i, j)) {
                continue;
            }
            for (std::size_t r = 0; r < b.rows(); ++r) {
                for (std::size_t s = 0; s < b.cols(); ++s) {
                    if (b.get(r, s)) {
                        c.set(i * b.rows() + r, j * b.cols() + s, true);
                    }
                }
            }
        }
    }
    return c;
}

/// Columns of A followed by columns of B.
inline BinaryMatrix hstack(const BinaryMatrix& a, const BinaryMatrix& b) {
    if (a.rows() != b.rows()) {
        throw std::invalid_argument("hstack row mismatch: " + std::to_string(a.rows()) +
                                    " != " + std::to_string(b.rows()));
    }
    BinaryMatrix c(a.rows(), a.cols() + b.cols());
    for (std::size_t r = 0; r < a.rows(); ++r) {
        for (std::size_t col = 0; col < a.cols(); ++col) {
            if (a.get(r, col)) {
                c.set(r, col, true);
            }
        }
        for (std::size_t col = 0; col < b.cols(); ++col) {
            if (b.get(r, col)) {
                c.set(r, a.cols() + col, true);
            }
        }
    }
    return c;
}

inline BinaryMatrix transpose(const BinaryMatrix& a) {
    BinaryMatrix c(a.cols(), a.rows());
    for (std::size_t r = 0; r < a.rows(); ++r) {
        for (std::size_t col = 0; col < a.cols(); ++col) {
            if (a.get(r, col)) {
                c.set(col, r, true);
            }
        }
    }
    return c;
}

/// GF(2) row rank by Gaussian elimination on a working copy; the input is
/// never mutated.
inline std::size_t rank(const BinaryMatrix& a) {
    BinaryMatrix work = a;
    std::size_t pivot = 0;
    for (std::size_t col = 0; col < work.cols() && pivot < work.rows(); ++col) {
        std::size_t r = pivot;
        while (r < work.rows() && !work.get(r, col)) {
            ++r;
        }
        if (r == work.rows()) {
            continue;
        }
        work.swap_rows(pivot, r);
        for (std::size_t i = 0; i < work.rows(); ++i) {
            if (i != pivot && work.get(i, col)) {
                work.xor_row(i, pivot);
            }
        }
        ++pivot;
    }
    return pivot;
}

inline bool is_zero(const BinaryMatrix& a) {
    for (std::size_t r = 0; r < a.rows(); ++r) {
        for (std::size_t c = 0; c < a.cols(); ++c) {
            if (a.get(r, c)) {
                return false;
            }
        }
    }
    return true;
}

inline void save_matrix_text(const std::string& path, const BinaryMatrix& m) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot open for writing: " + path);
    }
    out << m.to_text();
    if (!out) {
        throw std::runtime_error("write failed: " + path);
    }
}

inline BinaryMatrix load_matrix_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open: " + path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return BinaryMatrix::parse_text(buf.str());
}

}  // namespace qeclab
