#include "qeclab/decoders.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include <gtest/gtest.h>

#include "qeclab/codes.hpp"
#include "qeclab/rng.hpp"

using namespace qeclab;

namespace {

StabilizerCode hamming_product_code() {
    auto [hx, hz] = hypergraph_product(hamming74_check_matrix());
    return css_check_matrix(hx, hz);
}

std::vector<PauliString> all_weight_one(std::size_t n) {
    std::vector<PauliString> out;
    for (std::size_t q = 0; q < n; ++q) {
        for (char l : {'X', 'Y', 'Z'}) {
            PauliString e(n);
            e.set_letter(q, l);
            out.push_back(e);
        }
    }
    return out;
}

// Independent MAP oracle: collect every error per syndrome, then pick the
// winner by explicit (probability desc, weight asc, lexicographic asc)
// comparison over the full list.
std::map<std::string, PauliString> brute_force_map(const StabilizerCode& code,
                                                   const ChannelParams& params) {
    std::map<std::string, std::vector<PauliString>> by_syndrome;
    std::size_t n = code.num_qubits();
    static const char letters[] = {'I', 'X', 'Y', 'Z'};
    for (uint64_t idx = 0; idx < (uint64_t{1} << (2 * n)); ++idx) {
        PauliString e(n);
        uint64_t rest = idx;
        for (std::size_t q = 0; q < n; ++q) {
            e.set_letter(q, letters[rest & 3]);
            rest >>= 2;
        }
        by_syndrome[syndrome(code, e).to_string()].push_back(e);
    }
    std::map<std::string, PauliString> winners;
    for (auto& [key, errors] : by_syndrome) {
        const PauliString* best = &errors[0];
        double best_p = error_probability(*best, params);
        for (const PauliString& e : errors) {
            double p = error_probability(e, params);
            if (p > best_p ||
                (p == best_p && (weight(e) < weight(*best) ||
                                 (weight(e) == weight(*best) && pauli_less(e, *best))))) {
                best = &e;
                best_p = p;
            }
        }
        winners.emplace(key, *best);
    }
    return winners;
}

TEST(LookupTable, FiveQubitZeroSyndromeIsIdentity) {
    SyndromeTable table = build_lookup_table(five_qubit_code());
    EXPECT_TRUE(table_decode(table, BitVector(4)).is_identity());
}

TEST(LookupTable, FiveQubitEntriesArePerfect) {
    StabilizerCode code = five_qubit_code();
    SyndromeTable table = build_lookup_table(code);
    ASSERT_EQ(table.entries.size(), 16u);
    std::size_t weight_one_entries = 0;
    for (const PauliString& e : table.entries) {
        EXPECT_LE(weight(e), 1u);
        if (weight(e) == 1) {
            ++weight_one_entries;
        }
    }
    EXPECT_EQ(weight_one_entries, 15u);
    // All 15 weight-1 errors appear as entries.
    for (const PauliString& e : all_weight_one(5)) {
        EXPECT_EQ(table_decode(table, syndrome(code, e)), e);
    }
}

TEST(LookupTable, EntriesMatchTheirSyndromeKey) {
    StabilizerCode code = five_qubit_code();
    SyndromeTable table = build_lookup_table(code);
    for (uint64_t key = 0; key < table.entries.size(); ++key) {
        EXPECT_EQ(syndrome(code, table.entries[key]).to_key(), key);
    }
}

TEST(LookupTable, GuardRejectsLargeCodes) {
    try {
        build_lookup_table(hamming_product_code());
        FAIL() << "expected guard rejection";
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("table infeasible"), std::string::npos);
    }
}

TEST(LookupTable, DeterministicRebuild) {
    SyndromeTable a = build_lookup_table(five_qubit_code());
    SyndromeTable b = build_lookup_table(five_qubit_code());
    EXPECT_EQ(a.entries, b.entries);
}

TEST(MapTable, MatchesLookupForSmallSymmetricNoise) {
    StabilizerCode code = five_qubit_code();
    SyndromeTable lookup = build_lookup_table(code);
    SyndromeTable map = build_map_table(code, ChannelParams(0.01, 0.01, 0.01));
    EXPECT_EQ(map.entries, lookup.entries);
}

TEST(MapTable, MatchesBruteForceOracle) {
    StabilizerCode code = five_qubit_code();
    for (ChannelParams params :
         {ChannelParams(0.05, 0.05, 0.05), ChannelParams(0.3, 0.015, 0.015),
          ChannelParams(0.02, 0.2, 0.07)}) {
        SyndromeTable map = build_map_table(code, params);
        auto oracle = brute_force_map(code, params);
        for (uint64_t key = 0; key < map.entries.size(); ++key) {
            BitVector s(4);
            for (std::size_t i = 0; i < 4; ++i) {
                s.set(i, (key >> i) & 1);
            }
            EXPECT_EQ(map.entries[key], oracle.at(s.to_string()));
        }
    }
}

TEST(MapTable, PrefersXPairsOverSingleYZUnderAsymmetricNoise) {
    // With px = 0.3 and py = pz = 0.015, a two-X error beats a single Y or Z:
    // 0.3^2 * 0.67^3 > 0.015 * 0.67^4.
    StabilizerCode code = five_qubit_code();
    ChannelParams params(0.3, 0.015, 0.015);
    SyndromeTable lookup = build_lookup_table(code);
    SyndromeTable map = build_map_table(code, params);
    std::size_t upgraded = 0;
    for (uint64_t key = 0; key < map.entries.size(); ++key) {
        const PauliString& lk = lookup.entries[key];
        const PauliString& mp = map.entries[key];
        bool lookup_is_single_yz = weight(lk) == 1 && lk.z_bits().count() > 0;
        bool map_is_x_pair = weight(mp) == 2 && mp.z_bits().count() == 0;
        if (lookup_is_single_yz && map_is_x_pair) {
            EXPECT_GT(error_probability(mp, params), error_probability(lk, params));
            ++upgraded;
        }
    }
    EXPECT_GE(upgraded, 1u);
}

TEST(MapTable, NoiselessChannelMapsZeroSyndromeToIdentity) {
    SyndromeTable map = build_map_table(five_qubit_code(), ChannelParams(0, 0, 0));
    EXPECT_TRUE(map.entries[0].is_identity());
    EXPECT_DOUBLE_EQ(error_probability(map.entries[0], ChannelParams(0, 0, 0)), 1.0);
}

TEST(MapTable, GuardRejectsLargeCodes) {
    try {
        build_map_table(hamming_product_code(), ChannelParams(0.1, 0.1, 0.1));
        FAIL() << "expected guard rejection";
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("exact MAP infeasible"), std::string::npos);
    }
}

TEST(TableDecode, RejectsWrongSyndromeLength) {
    SyndromeTable table = build_lookup_table(five_qubit_code());
    EXPECT_THROW(table_decode(table, BitVector(3)), std::invalid_argument);
}

TEST(ExactFailureRate, NoiselessChannelIsZero) {
    StabilizerCode code = five_qubit_code();
    SyndromeTable table = build_lookup_table(code);
    EXPECT_DOUBLE_EQ(exact_failure_rate(table, code, ChannelParams(0, 0, 0)), 0.0);
}

TEST(ExactFailureRate, MatchesPerfectCodeClosedForm) {
    // Success mass of the perfect-code table: the identity plus the 15
    // weight-1 errors, so failure = 1 - (1-3q)^5 - 15q(1-3q)^4.
    StabilizerCode code = five_qubit_code();
    SyndromeTable table = build_lookup_table(code);
    double q = 0.0157895;
    double got = exact_failure_rate(table, code, ChannelParams(q, q, q));
    double closed_form =
        1.0 - (std::pow(1.0 - 3.0 * q, 5) + 15.0 * q * std::pow(1.0 - 3.0 * q, 4));
    EXPECT_NEAR(got, closed_form, 1e-12);
    EXPECT_NEAR(got, 0.020386626965691157, 1e-12);  // frozen from the closed form
}

TEST(ExactFailureRate, MapBeatsLookupAndRandomTables) {
    StabilizerCode code = five_qubit_code();
    SyndromeTable lookup = build_lookup_table(code);
    ChannelParams params(0.22, 0.03, 0.08);
    SyndromeTable map = build_map_table(code, params);
    double map_rate = exact_failure_rate(map, code, params);
    EXPECT_LE(map_rate, exact_failure_rate(lookup, code, params));

    // Random valid tables: multiply entries by random stabilizer elements,
    // which keeps each entry inside its syndrome class.
    Rng rng(404);
    for (int trial = 0; trial < 100; ++trial) {
        SyndromeTable random_table = lookup;
        for (PauliString& e : random_table.entries) {
            for (const PauliString& g : code.generators()) {
                if (rng.uniform_int(2) == 1) {
                    e *= g;
                }
            }
        }
        for (uint64_t key = 0; key < random_table.entries.size(); ++key) {
            ASSERT_EQ(syndrome(code, random_table.entries[key]).to_key(), key);
        }
        EXPECT_LE(map_rate, exact_failure_rate(random_table, code, params));
    }
}

TEST(ExactFailureRate, MapNeverWorseOnParamGrid) {
    StabilizerCode code = five_qubit_code();
    SyndromeTable lookup = build_lookup_table(code);
    for (double px : {0.05, 0.1, 0.2, 0.3}) {
        for (double ratio : {0.05, 0.5, 1.0}) {
            ChannelParams params(px, ratio * px, ratio * px);
            SyndromeTable map = build_map_table(code, params);
            EXPECT_LE(exact_failure_rate(map, code, params),
                      exact_failure_rate(lookup, code, params));
        }
    }
}

TEST(SmallSetFlip, ZeroSyndromeGivesIdentityWithoutIterating) {
    StabilizerCode code = five_qubit_code();
    SmallSetFlipDecoder decoder(code);
    std::vector<std::size_t> trace;
    PauliString result = decoder.decode_traced(BitVector(4), &trace);
    EXPECT_TRUE(result.is_identity());
    EXPECT_TRUE(trace.empty());
}

TEST(SmallSetFlip, RecoversAllWeightOneErrorsOnFiveQubitCode) {
    StabilizerCode code = five_qubit_code();
    SmallSetFlipDecoder decoder(code);
    for (const PauliString& e : all_weight_one(5)) {
        EXPECT_EQ(decoder.decode(syndrome(code, e)), e) << e.to_string();
    }
}

TEST(SmallSetFlip, ResidualWeightStrictlyDecreases) {
    StabilizerCode code = hamming_product_code();
    SmallSetFlipDecoder decoder(code);
    Rng rng(777);
    for (int trial = 0; trial < 50; ++trial) {
        BitVector s(code.num_generators());
        for (std::size_t i = 0; i < s.size(); ++i) {
            s.set(i, rng.uniform_int(2) == 1);
        }
        std::vector<std::size_t> trace;
        decoder.decode_traced(s, &trace);
        std::size_t prev = s.count();
        for (std::size_t w : trace) {
            EXPECT_LT(w, prev);
            prev = w;
        }
    }
}

TEST(SmallSetFlip, MaxPassesCapsAppliedFlips) {
    StabilizerCode code = hamming_product_code();
    Rng rng(88);
    BitVector s(code.num_generators());
    for (std::size_t i = 0; i < s.size(); ++i) {
        s.set(i, rng.uniform_int(2) == 1);
    }
    SmallSetFlipOptions opts;
    opts.max_passes = 2;
    SmallSetFlipDecoder decoder(code, opts);
    std::vector<std::size_t> trace;
    decoder.decode_traced(s, &trace);
    EXPECT_LE(trace.size(), 2u);
}

TEST(SmallSetFlip, GuardRejectsHeavyGenerators) {
    // A single all-X generator on 13 qubits exceeds the default weight guard.
    BinaryMatrix check(1, 26);
    for (std::size_t c = 0; c < 13; ++c) {
        check.set(0, c, true);
    }
    StabilizerCode code = StabilizerCode::from_check_matrix(check);
    try {
        SmallSetFlipDecoder decoder(code);
        FAIL() << "expected guard rejection";
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("generator weight too large"), std::string::npos);
    }
}

TEST(SmallSetFlip, CssRestrictedModeRecoversWeightOneOnSteane) {
    BinaryMatrix h = hamming74_check_matrix();
    StabilizerCode code = css_check_matrix(h, h);
    SmallSetFlipOptions opts;
    opts.css_restricted = true;
    SmallSetFlipDecoder restricted(code, opts);
    SmallSetFlipDecoder generic(code);
    for (const PauliString& e : all_weight_one(7)) {
        EXPECT_EQ(restricted.decode(syndrome(code, e)), e) << e.to_string();
        EXPECT_EQ(generic.decode(syndrome(code, e)), e) << e.to_string();
    }
}

TEST(TableJson, RoundTripPreservesEverything) {
    StabilizerCode code = five_qubit_code();
    SyndromeTable map = build_map_table(code, ChannelParams(0.3, 0.015, 0.015));
    SyndromeTable reparsed = table_from_json(table_to_json(map));
    EXPECT_EQ(reparsed.policy, map.policy);
    EXPECT_EQ(reparsed.num_qubits, map.num_qubits);
    EXPECT_EQ(reparsed.syndrome_bits, map.syndrome_bits);
    EXPECT_EQ(reparsed.entries, map.entries);
    ASSERT_TRUE(reparsed.channel.has_value());
    EXPECT_EQ(reparsed.channel->px, map.channel->px);
    EXPECT_EQ(reparsed.channel->py, map.channel->py);
    EXPECT_EQ(reparsed.channel->pz, map.channel->pz);
}

TEST(TableJson, RejectsPartialTables) {
    nlohmann::json j = table_to_json(build_lookup_table(five_qubit_code()));
    j["entries"].erase("0000");
    EXPECT_THROW(table_from_json(j), std::invalid_argument);
}

}  // namespace
