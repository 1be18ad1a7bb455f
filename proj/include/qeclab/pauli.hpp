#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

#include "qeclab/gf2.hpp"
#include "qeclab/rng.hpp"

namespace qeclab {

/// Per-qubit probabilities of the asymmetric depolarizing channel. The
/// identity is applied with probability 1 - px - py - pz.
struct ChannelParams {
    double px = 0.0;
    double py = 0.0;
    double pz = 0.0;

    ChannelParams() = default;

    ChannelParams(double x, double y, double z) : px(x), py(y), pz(z) {
        if (px < 0.0 || px > 1.0 || py < 0.0 || py > 1.0 || pz < 0.0 || pz > 1.0) {
            throw std::invalid_argument("channel probabilities must lie in [0, 1]");
        }
        if (px + py + pz > 1.0) {
            throw std::invalid_argument("channel probabilities must satisfy px+py+pz <= 1");
        }
    }

    double p_identity() const {
        return 1.0 - px - py - pz;
    }
};

/// n-qubit Pauli operator modulo phase, in symplectic (x|z) form:
/// x bit set where the letter is X or Y, z bit set where it is Z or Y.
class PauliString {
  public:
    PauliString() = default;

    /// Identity on n qubits.
    explicit PauliString(std::size_t n) : x_(n), z_(n) {}

    PauliString(BitVector x, BitVector z) : x_(std::move(x)), z_(std::move(z)) {
        if (x_.size() != z_.size()) {
            throw std::invalid_argument("x and z bit sequences must have equal length");
        }
    }

    static PauliString from_string(std::string_view s) {
        PauliString p(s.size());
        for (std::size_t i = 0; i < s.size(); ++i) {
            p.set_letter(i, s[i]);
        }
        return p;
    }

    std::size_t num_qubits() const {
        return x_.size();
    }

    char letter(std::size_t i) const {
        bool x = x_.get(i);
        bool z = z_.get(i);
        if (x && z) {
            return 'Y';
        }
        if (x) {
            return 'X';
        }
        if (z) {
            return 'Z';
        }
        return 'I';
    }

    void set_letter(std::size_t i, char l) {
        switch (l) {
            case 'I':
                x_.set(i, false);
                z_.set(i, false);
                break;
            case 'X':
                x_.set(i, true);
                z_.set(i, false);
                break;
            case 'Y':
                x_.set(i, true);
                z_.set(i, true);
                break;
            case 'Z':
                x_.set(i, false);
                z_.set(i, true);
                break;
            default:
                throw std::invalid_argument("Pauli letter must be one of I, X, Y, Z");
        }
    }

    const BitVector& x_bits() const {
        return x_;
    }

    const BitVector& z_bits() const {
        return z_;
    }

    /// Phase-free product: component-wise XOR of the (x|z) pairs.
    PauliString& operator*=(const PauliString& o) {
        x_ ^= o.x_;
        z_ ^= o.z_;
        return *this;
    }

    friend PauliString operator*(PauliString a, const PauliString& b) {
        a *= b;
        return a;
    }

    bool operator==(const PauliString&) const = default;

    bool is_identity() const {
        return !x_.any() && !z_.any();
    }

    std::string to_string() const {
        std::string s(num_qubits(), 'I');
        for (std::size_t i = 0; i < s.size(); ++i) {
            s[i] = letter(i);
        }
        return s;
    }

  private:
    BitVector x_;
    BitVector z_;
};

/// Number of qubit positions acted on non-trivially.
inline std::size_t weight(const PauliString& p) {
    std::size_t w = 0;
    auto xw = p.x_bits().words();
    auto zw = p.z_bits().words();
    for (std::size_t i = 0; i < xw.size(); ++i) {
        w += static_cast<std::size_t>(__builtin_popcountll(xw[i] | zw[i]));
    }
    return w;
}

/// (P.x . Q.z + P.z . Q.x) mod 2: 0 when the operators commute, 1 when they
/// anticommute.
inline int symplectic_product(const PauliString& p, const PauliString& q) {
    if (p.num_qubits() != q.num_qubits()) {
        throw std::invalid_argument("symplectic product length mismatch");
    }
    return BitVector::dot(p.x_bits(), q.z_bits()) ^ BitVector::dot(p.z_bits(), q.x_bits());
}

/// Letter order I < X < Y < Z with qubit 0 most significant; the enumeration
/// and tie-break order used by all table builders and decoders.
inline bool pauli_less(const PauliString& a, const PauliString& b) {
    auto code = [](char l) {
        switch (l) {
            case 'I':
                return 0;
            case 'X':
                return 1;
            case 'Y':
                return 2;
            default:
                return 3;
        }
    };
    for (std::size_t i = 0; i < a.num_qubits(); ++i) {
        int ca = code(a.letter(i));
        int cb = code(b.letter(i));
        if (ca != cb) {
            return ca < cb;
        }
    }
    return false;
}

/// i.i.d. per-qubit error draw: X with px, Y with py, Z with pz, identity
/// otherwise. Deterministic for a fixed rng state.
inline PauliString sample_error(const ChannelParams& params, std::size_t n, Rng& rng) {
    PauliString e(n);
    for (std::size_t i = 0; i < n; ++i) {
        double u = rng.uniform01();
        if (u < params.px) {
            e.set_letter(i, 'X');
        } else if (u < params.px + params.py) {
            e.set_letter(i, 'Y');
        } else if (u < params.px + params.py + params.pz) {
            e.set_letter(i, 'Z');
        }
    }
    return e;
}

/// Channel probability of drawing exactly this error pattern.
inline double error_probability(const PauliString& p, const ChannelParams& params) {
    double prob = 1.0;
    for (std::size_t i = 0; i < p.num_qubits(); ++i) {
        switch (p.letter(i)) {
            case 'I':
                prob *= params.p_identity();
                break;
            case 'X':
                prob *= params.px;
                break;
            case 'Y':
                prob *= params.py;
                break;
            default:
                prob *= params.pz;
                break;
        }
    }
    return prob;
}

}  // namespace qeclab
