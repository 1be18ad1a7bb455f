#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "qeclab/codes.hpp"
#include "qeclab/gf2.hpp"
#include "qeclab/pauli.hpp"

namespace qeclab {

/// Visits every Pauli string on n qubits in increasing weight; within a
/// weight class in lexicographic order (qubit 0 most significant, I<X<Y<Z).
/// The visitor returns false to stop the enumeration.
inline void for_each_pauli_by_weight(std::size_t n,
                                     const std::function<bool(const PauliString&)>& visit) {
    PauliString cur(n);
    bool stopped = false;
    std::function<void(std::size_t, std::size_t)> place = [&](std::size_t pos,
                                                              std::size_t remaining) {
        if (stopped) {
            return;
        }
        if (remaining == 0) {
            if (!visit(cur)) {
                stopped = true;
            }
            return;
        }
        if (n - pos < remaining) {
            return;
        }
        if (n - pos > remaining) {
            place(pos + 1, remaining);
        }
        for (char l : {'X', 'Y', 'Z'}) {
            if (stopped) {
                break;
            }
            cur.set_letter(pos, l);
            place(pos + 1, remaining - 1);
            cur.set_letter(pos, 'I');
        }
    };
    for (std::size_t w = 0; w <= n && !stopped; ++w) {
        place(0, w);
    }
}

enum class TablePolicy { min_weight, exact_map };

/// Total map from every length-(n-k) syndrome to a correction. Entries are
/// indexed by the syndrome packed as an integer, generator 0 at bit 0.
struct SyndromeTable {
    TablePolicy policy = TablePolicy::min_weight;
    std::optional<ChannelParams> channel;  // set for exact_map tables
    std::size_t num_qubits = 0;
    std::size_t syndrome_bits = 0;
    std::vector<PauliString> entries;
};

/// Enumerates errors in (weight, lexicographic) order; the first error
/// reaching each syndrome claims it. Exact for any channel that favors low
/// weight. Guarded: 2^(n-k) table slots must not exceed 2^max_syndrome_bits.
inline SyndromeTable build_lookup_table(const StabilizerCode& code,
                                        std::size_t max_syndrome_bits = 20) {
    std::size_t nk = code.num_generators();
    if (nk > max_syndrome_bits) {
        throw std::invalid_argument("table infeasible: 2^" + std::to_string(nk) +
                                    " syndromes exceed the guard of 2^" +
                                    std::to_string(max_syndrome_bits));
    }
    std::size_t slots = std::size_t{1} << nk;
    std::vector<char> filled(slots, 0);
    SyndromeTable table;
    table.policy = TablePolicy::min_weight;
    table.num_qubits = code.num_qubits();
    table.syndrome_bits = nk;
    table.entries.assign(slots, PauliString(code.num_qubits()));
    std::size_t remaining = slots;
    for_each_pauli_by_weight(code.num_qubits(), [&](const PauliString& e) {
        uint64_t key = syndrome(code, e).to_key();
        if (!filled[key]) {
            filled[key] = 1;
            table.entries[key] = e;
            --remaining;
        }
        return remaining != 0;
    });
    return table;
}

/// Exhaustive maximum-a-posteriori table: per syndrome, the error of maximal
/// channel probability. Ties go to lower weight, then lexicographic order.
inline SyndromeTable build_map_table(const StabilizerCode& code, const ChannelParams& params,
                                     std::size_t max_qubits = 10) {
    if (code.num_qubits() > max_qubits) {
        throw std::invalid_argument("exact MAP infeasible: 4^" +
                                    std::to_string(code.num_qubits()) +
                                    " errors exceed the guard of 4^" +
                                    std::to_string(max_qubits));
    }
    std::size_t nk = code.num_generators();
    std::size_t slots = std::size_t{1} << nk;
    SyndromeTable table;
    table.policy = TablePolicy::exact_map;
    table.channel = params;
    table.num_qubits = code.num_qubits();
    table.syndrome_bits = nk;
    table.entries.assign(slots, PauliString(code.num_qubits()));
    std::vector<double> best(slots, -1.0);
    for_each_pauli_by_weight(code.num_qubits(), [&](const PauliString& e) {
        uint64_t key = syndrome(code, e).to_key();
        double p = error_probability(e, params);
        if (p > best[key]) {
            best[key] = p;
            table.entries[key] = e;
        }
        return true;
    });
    return table;
}

inline PauliString table_decode(const SyndromeTable& table, const BitVector& s) {
    if (s.size() != table.syndrome_bits) {
        throw std::invalid_argument("syndrome length does not match table");
    }
    return table.entries[s.to_key()];
}

/// Exact decoding-failure probability of a table under the channel:
/// 1 - sum over syndromes of Pr(the stored entry occurs).
inline double exact_failure_rate(const SyndromeTable& table, const StabilizerCode& code,
                                 const ChannelParams& params, std::size_t max_qubits = 10) {
    if (code.num_qubits() > max_qubits) {
        throw std::invalid_argument("exact evaluation infeasible: code exceeds " +
                                    std::to_string(max_qubits) + " qubits");
    }
    if (table.num_qubits != code.num_qubits() || table.syndrome_bits != code.num_generators()) {
        throw std::invalid_argument("table does not match code");
    }
    double success = 0.0;
    for (const PauliString& e : table.entries) {
        success += error_probability(e, params);
    }
    return 1.0 - success;
}

struct SmallSetFlipOptions {
    std::size_t max_passes = 0;  // 0 = no cap; termination comes from strict decrease
    std::size_t max_generator_weight = 12;
    bool css_restricted = false;
};

/// Greedy small-set-flip decoding. Candidate corrections are the non-trivial
/// Pauli patterns supported inside a single generator; each pass applies the
/// candidate with the largest strict reduction of the residual syndrome
/// weight. Ties go to lower pattern weight, then generator row order, then
/// lexicographic pattern order.
class SmallSetFlipDecoder {
  public:
    explicit SmallSetFlipDecoder(const StabilizerCode& code, SmallSetFlipOptions opts = {})
        : code_(&code), opts_(opts), syn_words_((code.num_generators() + 63) / 64) {
        std::size_t n = code.num_qubits();
        std::size_t nk = code.num_generators();

        // Per-qubit letter syndromes: column q of the (a|b) halves gives the
        // commutation bits of X, Z (and by XOR, Y) at qubit q.
        std::vector<BitVector> syn_x(n, BitVector(nk));
        std::vector<BitVector> syn_z(n, BitVector(nk));
        for (std::size_t i = 0; i < nk; ++i) {
            const PauliString& g = code.generators()[i];
            for (std::size_t q = 0; q < n; ++q) {
                if (g.z_bits().get(q)) {
                    syn_x[q].set(i, true);  // X at q anticommutes with Z part
                }
                if (g.x_bits().get(q)) {
                    syn_z[q].set(i, true);
                }
            }
        }
        auto letter_syndrome = [&](std::size_t q, int letter) {
            switch (letter) {
                case 1:
                    return syn_x[q];
                case 3:
                    return syn_z[q];
                default:
                    return syn_x[q] ^ syn_z[q];
            }
        };

        for (std::size_t g = 0; g < nk; ++g) {
            const PauliString& gen = code.generators()[g];
            std::vector<std::size_t> support;
            for (std::size_t q = 0; q < n; ++q) {
                if (gen.letter(q) != 'I') {
                    support.push_back(q);
                }
            }
            if (support.size() > opts.max_generator_weight) {
                throw std::invalid_argument(
                    "generator weight too large: " + std::to_string(support.size()) +
                    " exceeds the guard of " + std::to_string(opts.max_generator_weight));
            }
            bool x_type = !gen.z_bits().any();
            bool z_type = !gen.x_bits().any();
            std::size_t w = support.size();
            uint64_t total = 1;
            for (std::size_t i = 0; i < w; ++i) {
                total *= 4;
            }
            for (uint64_t id = 1; id < total; ++id) {
                // Base-4 digits, first support qubit most significant, so that
                // ascending id is ascending lexicographic order.
                BitVector syn(nk);
                std::size_t pattern_weight = 0;
                bool admissible = true;
                uint64_t rest = id;
                for (std::size_t pos = w; pos-- > 0;) {
                    int letter = static_cast<int>(rest & 3);
                    rest >>= 2;
                    if (letter == 0) {
                        continue;
                    }
                    if (opts.css_restricted) {
                        // X-type generators see only Z-side flips and vice
                        // versa; mixed generators keep the full pattern set.
                        if ((x_type && letter != 3) || (z_type && letter != 1)) {
                            admissible = false;
                            break;
                        }
                    }
                    ++pattern_weight;
                    syn ^= letter_syndrome(support[pos], letter);
                }
                if (!admissible) {
                    continue;
                }
                generator_of_.push_back(g);
                pattern_id_.push_back(id);
                pattern_weight_.push_back(static_cast<uint8_t>(pattern_weight));
                for (uint64_t wd : syn.words()) {
                    syndromes_.push_back(wd);
                }
            }
        }
    }

    PauliString decode(const BitVector& s) const {
        return decode_traced(s, nullptr);
    }

    /// As decode, additionally recording the residual syndrome weight after
    /// each applied flip.
    PauliString decode_traced(const BitVector& s, std::vector<std::size_t>* residual_weights) const {
        if (s.size() != code_->num_generators()) {
            throw std::invalid_argument("syndrome length does not match code");
        }
        std::vector<uint64_t> residual(s.words().begin(), s.words().end());
        residual.resize(syn_words_, 0);
        PauliString correction(code_->num_qubits());
        std::size_t applied = 0;
        std::size_t count = generator_of_.size();
        while (opts_.max_passes == 0 || applied < opts_.max_passes) {
            std::size_t current = popcount(residual.data());
            if (current == 0) {
                break;
            }
            std::size_t best_idx = count;
            std::size_t best_after = current;
            uint8_t best_weight = 0;
            for (std::size_t c = 0; c < count; ++c) {
                std::size_t after = popcount_xor(residual.data(), &syndromes_[c * syn_words_]);
                if (after < best_after ||
                    (best_idx != count && after == best_after &&
                     pattern_weight_[c] < best_weight)) {
                    best_idx = c;
                    best_after = after;
                    best_weight = pattern_weight_[c];
                }
            }
            if (best_idx == count) {
                break;  // no candidate strictly decreases the residual
            }
            const uint64_t* syn = &syndromes_[best_idx * syn_words_];
            for (std::size_t i = 0; i < syn_words_; ++i) {
                residual[i] ^= syn[i];
            }
            correction *= materialize(best_idx);
            ++applied;
            if (residual_weights) {
                residual_weights->push_back(best_after);
            }
        }
        return correction;
    }

  private:
    PauliString materialize(std::size_t c) const {
        const PauliString& gen = code_->generators()[generator_of_[c]];
        std::vector<std::size_t> support;
        for (std::size_t q = 0; q < code_->num_qubits(); ++q) {
            if (gen.letter(q) != 'I') {
                support.push_back(q);
            }
        }
        PauliString p(code_->num_qubits());
        uint64_t rest = pattern_id_[c];
        static constexpr char kLetters[] = {'I', 'X', 'Y', 'Z'};
        for (std::size_t pos = support.size(); pos-- > 0;) {
            p.set_letter(support[pos], kLetters[rest & 3]);
            rest >>= 2;
        }
        return p;
    }

    std::size_t popcount(const uint64_t* words) const {
        std::size_t c = 0;
        for (std::size_t i = 0; i < syn_words_; ++i) {
            c += static_cast<std::size_t>(__builtin_popcountll(words[i]));
        }
        return c;
    }

    std::size_t popcount_xor(const uint64_t* a, const uint64_t* b) const {
        std::size_t c = 0;
        for (std::size_t i = 0; i < syn_words_; ++i) {
            c += static_cast<std::size_t>(__builtin_popcountll(a[i] ^ b[i]));
        }
        return c;
    }

    const StabilizerCode* code_;
    SmallSetFlipOptions opts_;
    std::size_t syn_words_;
    std::vector<std::size_t> generator_of_;
    std::vector<uint64_t> pattern_id_;
    std::vector<uint8_t> pattern_weight_;
    std::vector<uint64_t> syndromes_;  // flattened, stride syn_words_
};

inline PauliString small_set_flip(const StabilizerCode& code, const BitVector& s,
                                  std::size_t max_passes = 0) {
    SmallSetFlipOptions opts;
    opts.max_passes = max_passes;
    return SmallSetFlipDecoder(code, opts).decode(s);
}

inline nlohmann::json table_to_json(const SyndromeTable& table) {
    nlohmann::json entries = nlohmann::json::object();
    for (std::size_t key = 0; key < table.entries.size(); ++key) {
        BitVector s(table.syndrome_bits);
        for (std::size_t i = 0; i < table.syndrome_bits; ++i) {
            s.set(i, (key >> i) & 1);
        }
        entries[s.to_string()] = table.entries[key].to_string();
    }
    nlohmann::json j;
    j["policy"] = table.policy == TablePolicy::min_weight ? "min-weight" : "exact-map";
    j["n"] = table.num_qubits;
    j["syndrome_bits"] = table.syndrome_bits;
    if (table.channel) {
        j["channel"] = {{"px", table.channel->px},
                        {"py", table.channel->py},
                        {"pz", table.channel->pz}};
    }
    j["entries"] = std::move(entries);
    return j;
}

inline SyndromeTable table_from_json(const nlohmann::json& j) {
    SyndromeTable table;
    std::string policy = j.at("policy").get<std::string>();
    if (policy == "min-weight") {
        table.policy = TablePolicy::min_weight;
    } else if (policy == "exact-map") {
        table.policy = TablePolicy::exact_map;
    } else {
        throw std::invalid_argument("unknown table policy: " + policy);
    }
    table.num_qubits = j.at("n").get<std::size_t>();
    table.syndrome_bits = j.at("syndrome_bits").get<std::size_t>();
    if (j.contains("channel")) {
        const auto& c = j.at("channel");
        table.channel = ChannelParams(c.at("px").get<double>(), c.at("py").get<double>(),
                                      c.at("pz").get<double>());
    }
    std::size_t slots = std::size_t{1} << table.syndrome_bits;
    const auto& entries = j.at("entries");
    if (entries.size() != slots) {
        throw std::invalid_argument("table is not total: expected " + std::to_string(slots) +
                                    " entries, found " + std::to_string(entries.size()));
    }
    table.entries.assign(slots, PauliString(table.num_qubits));
    for (const auto& [key, value] : entries.items()) {
        BitVector s = BitVector::from_string(key);
        if (s.size() != table.syndrome_bits) {
            throw std::invalid_argument("table key has wrong syndrome length: " + key);
        }
        PauliString e = PauliString::from_string(value.get<std::string>());
        if (e.num_qubits() != table.num_qubits) {
            throw std::invalid_argument("table entry has wrong qubit count");
        }
        table.entries[s.to_key()] = std::move(e);
    }
    return table;
}

}  // namespace qeclab
