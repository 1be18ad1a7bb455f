#pragma once

#include <cstddef>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qeclab/gf2.hpp"
#include "qeclab/pauli.hpp"

namespace qeclab {

/// [[n,k]] stabilizer code held as its (n-k) x 2n check matrix. Rows are the
/// (a|b) symplectic form of the generators; construction validates pairwise
/// commutation and row independence, after which the value is immutable.
class StabilizerCode {
  public:
    static StabilizerCode from_check_matrix(BinaryMatrix check) {
        return StabilizerCode(std::move(check), std::nullopt);
    }

    static StabilizerCode from_css_parts(BinaryMatrix check, BinaryMatrix hx, BinaryMatrix hz) {
        return StabilizerCode(std::move(check), std::make_pair(std::move(hx), std::move(hz)));
    }

    std::size_t num_qubits() const {
        return n_;
    }

    std::size_t num_logical() const {
        return k_;
    }

    std::size_t num_generators() const {
        return n_ - k_;
    }

    const BinaryMatrix& check() const {
        return check_;
    }

    const std::vector<PauliString>& generators() const {
        return generators_;
    }

    const std::optional<std::pair<BinaryMatrix, BinaryMatrix>>& css_parts() const {
        return css_parts_;
    }

  private:
    StabilizerCode(BinaryMatrix check,
                   std::optional<std::pair<BinaryMatrix, BinaryMatrix>> css)
        : check_(std::move(check)), css_parts_(std::move(css)) {
        if (check_.cols() % 2 != 0) {
            throw std::invalid_argument("check matrix must have an even column count");
        }
        n_ = check_.cols() / 2;
        if (check_.rows() > n_) {
            throw std::invalid_argument("more generators than physical qubits");
        }
        k_ = n_ - check_.rows();

        generators_.reserve(check_.rows());
        for (std::size_t r = 0; r < check_.rows(); ++r) {
            BitVector a(n_);
            BitVector b(n_);
            for (std::size_t c = 0; c < n_; ++c) {
                a.set(c, check_.get(r, c));
                b.set(c, check_.get(r, n_ + c));
            }
            generators_.emplace_back(std::move(a), std::move(b));
        }

        for (std::size_t i = 0; i < generators_.size(); ++i) {
            for (std::size_t j = i + 1; j < generators_.size(); ++j) {
                if (symplectic_product(generators_[i], generators_[j]) != 0) {
                    throw std::invalid_argument("generators do not commute");
                }
            }
        }
        if (rank(check_) != check_.rows()) {
            throw std::invalid_argument("generators not independent");
        }
    }

    BinaryMatrix check_;
    std::optional<std::pair<BinaryMatrix, BinaryMatrix>> css_parts_;
    std::vector<PauliString> generators_;
    std::size_t n_ = 0;
    std::size_t k_ = 0;
};

/// Turns a full-row-rank m x n parity-check matrix into an orthogonal CSS
/// pair: H_X = [H (x) I_n | I_m (x) H^T], H_Z = [I_n (x) H | H^T (x) I_m].
/// The resulting quantum code has parameters [[n^2 + m^2, k^2]].
inline std::pair<BinaryMatrix, BinaryMatrix> hypergraph_product(const BinaryMatrix& h) {
    std::size_t m = h.rows();
    std::size_t n = h.cols();
    if (m >= n) {
        throw std::invalid_argument("hypergraph product requires fewer rows than columns");
    }
    if (rank(h) != m) {
        throw std::invalid_argument("hypergraph product requires a full-row-rank matrix");
    }
    BinaryMatrix ht = transpose(h);
    BinaryMatrix hx = hstack(kron(h, BinaryMatrix::identity(n)),
                             kron(BinaryMatrix::identity(m), ht));
    BinaryMatrix hz = hstack(kron(BinaryMatrix::identity(n), h),
                             kron(ht, BinaryMatrix::identity(m)));
    return {std::move(hx), std::move(hz)};
}

/// Builds the block-diagonal check matrix [[H_X, 0], [0, H_Z]] of a CSS code.
/// Requires mat_mul(H_X, H_Z^T) == 0 and independent stacked rows.
inline StabilizerCode css_check_matrix(const BinaryMatrix& hx, const BinaryMatrix& hz) {
    if (hx.cols() != hz.cols()) {
        throw std::invalid_argument("H_X and H_Z must act on the same number of qubits");
    }
    if (!is_zero(mat_mul(hx, transpose(hz)))) {
        throw std::invalid_argument("not a valid CSS pair");
    }
    std::size_t n = hx.cols();
    BinaryMatrix check(hx.rows() + hz.rows(), 2 * n);
    for (std::size_t r = 0; r < hx.rows(); ++r) {
        for (std::size_t c = 0; c < n; ++c) {
            if (hx.get(r, c)) {
                check.set(r, c, true);
            }
        }
    }
    for (std::size_t r = 0; r < hz.rows(); ++r) {
        for (std::size_t c = 0; c < n; ++c) {
            if (hz.get(r, c)) {
                check.set(hx.rows() + r, n + c, true);
            }
        }
    }
    return StabilizerCode::from_css_parts(std::move(check), hx, hz);
}

/// The [[5,1]] code with generators XZZXI, IXZZX, XIXZZ, ZXIXZ in that order.
inline StabilizerCode five_qubit_code() {
    const std::vector<std::string> gens = {"XZZXI", "IXZZX", "XIXZZ", "ZXIXZ"};
    BinaryMatrix check(gens.size(), 10);
    for (std::size_t r = 0; r < gens.size(); ++r) {
        PauliString g = PauliString::from_string(gens[r]);
        for (std::size_t c = 0; c < 5; ++c) {
            check.set(r, c, g.x_bits().get(c));
            check.set(r, 5 + c, g.z_bits().get(c));
        }
    }
    return StabilizerCode::from_check_matrix(std::move(check));
}

/// Commutation bits of the error against each generator, in generator row
/// order. Bit 1 means the measured eigenvalue is -1.
inline BitVector syndrome(const StabilizerCode& code, const PauliString& e) {
    if (e.num_qubits() != code.num_qubits()) {
        throw std::invalid_argument("error length does not match code");
    }
    BitVector s(code.num_generators());
    for (std::size_t i = 0; i < code.num_generators(); ++i) {
        s.set(i, symplectic_product(code.generators()[i], e) != 0);
    }
    return s;
}

inline std::pair<std::size_t, std::size_t> code_params(const StabilizerCode& code) {
    return {code.num_qubits(), code.num_logical()};
}

inline nlohmann::json code_to_json(const StabilizerCode& code) {
    nlohmann::json j;
    j["n"] = code.num_qubits();
    j["k"] = code.num_logical();
    j["check"] = code.check().to_row_strings();
    if (code.css_parts()) {
        j["hx"] = code.css_parts()->first.to_row_strings();
        j["hz"] = code.css_parts()->second.to_row_strings();
    }
    return j;
}

inline StabilizerCode code_from_json(const nlohmann::json& j) {
    BinaryMatrix check = BinaryMatrix::from_rows(j.at("check").get<std::vector<std::string>>());
    StabilizerCode code =
        j.contains("hx") && j.contains("hz")
            ? StabilizerCode::from_css_parts(
                  std::move(check),
                  BinaryMatrix::from_rows(j.at("hx").get<std::vector<std::string>>()),
                  BinaryMatrix::from_rows(j.at("hz").get<std::vector<std::string>>()))
            : StabilizerCode::from_check_matrix(std::move(check));
    if (code.num_qubits() != j.at("n").get<std::size_t>() ||
        code.num_logical() != j.at("k").get<std::size_t>()) {
        throw std::invalid_argument("code file (n, k) does not match its check matrix");
    }
    return code;
}

inline void save_code(const std::string& path, const StabilizerCode& code) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot open for writing: " + path);
    }
    out << code_to_json(code).dump(2) << '\n';
}

inline StabilizerCode load_code(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open: " + path);
    }
    nlohmann::json j;
    in >> j;
    return code_from_json(j);
}

/// Hamming [7,4] parity-check matrix, the classical seed used throughout the
/// experiments.
inline BinaryMatrix hamming74_check_matrix() {
    return BinaryMatrix::from_rows({"1110100", "0111010", "1101001"});
}

}  // namespace qeclab
