#pragma once

#include <cmath>
#include <cstddef>
#include <fstream>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "qeclab/codes.hpp"
#include "qeclab/decoders.hpp"
#include "qeclab/mlp.hpp"
#include "qeclab/pauli.hpp"
#include "qeclab/rng.hpp"

namespace qeclab {

enum class Labeling { exact_map, empirical_map };

inline std::string labeling_name(Labeling l) {
    return l == Labeling::exact_map ? "exact-map" : "empirical-map";
}

struct LabeledSample {
    BitVector syndrome;
    PauliString error;
};

struct DecoderDataset {
    std::size_t num_qubits = 0;
    std::size_t syndrome_bits = 0;
    ChannelParams channel;
    Labeling labeling = Labeling::exact_map;
    std::vector<LabeledSample> samples;
};

/// Draws channel errors and labels each drawn syndrome. Exact-map labels come
/// from the exhaustive MAP table; empirical-map labels each syndrome with its
/// most frequent sampled error (ties: higher channel probability, then lower
/// weight, then lexicographic order). One pair is emitted per draw, so
/// frequent syndromes carry their natural weight.
inline DecoderDataset generate_dataset(const StabilizerCode& code, const ChannelParams& params,
                                       std::size_t n_samples, Labeling labeling, Rng& rng,
                                       std::size_t exact_map_max_qubits = 10) {
    if (n_samples < 1) {
        throw std::invalid_argument("dataset needs at least one sample");
    }
    DecoderDataset ds;
    ds.num_qubits = code.num_qubits();
    ds.syndrome_bits = code.num_generators();
    ds.channel = params;
    ds.labeling = labeling;
    ds.samples.reserve(n_samples);

    std::vector<PauliString> drawn;
    drawn.reserve(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i) {
        drawn.push_back(sample_error(params, code.num_qubits(), rng));
    }

    if (labeling == Labeling::exact_map) {
        SyndromeTable table;
        try {
            table = build_map_table(code, params, exact_map_max_qubits);
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument(std::string(e.what()) +
                                        "; use empirical-map labeling instead");
        }
        for (const PauliString& e : drawn) {
            BitVector s = syndrome(code, e);
            ds.samples.push_back({s, table_decode(table, s)});
        }
        return ds;
    }

    struct Tally {
        PauliString error;
        std::size_t count = 0;
        double prob = 0.0;
    };
    std::unordered_map<std::string, std::vector<Tally>> groups;
    std::vector<BitVector> syndromes;
    syndromes.reserve(n_samples);
    for (const PauliString& e : drawn) {
        BitVector s = syndrome(code, e);
        syndromes.push_back(s);
        auto& tallies = groups[s.to_string()];
        bool found = false;
        for (Tally& t : tallies) {
            if (t.error == e) {
                ++t.count;
                found = true;
                break;
            }
        }
        if (!found) {
            tallies.push_back({e, 1, error_probability(e, params)});
        }
    }
    std::unordered_map<std::string, PauliString> modal;
    for (auto& [key, tallies] : groups) {
        const Tally* best = &tallies[0];
        for (const Tally& t : tallies) {
            if (t.count > best->count ||
                (t.count == best->count &&
                 (t.prob > best->prob ||
                  (t.prob == best->prob &&
                   (weight(t.error) < weight(best->error) ||
                    (weight(t.error) == weight(best->error) &&
                     pauli_less(t.error, best->error))))))) {
                best = &t;
            }
        }
        modal.emplace(key, best->error);
    }
    for (std::size_t i = 0; i < n_samples; ++i) {
        ds.samples.push_back({syndromes[i], modal.at(syndromes[i].to_string())});
    }
    return ds;
}

/// Syndrome bits as a 0.0/1.0 input vector.
inline Eigen::VectorXd encode_syndrome(const BitVector& s) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(s.size()));
    for (std::size_t i = 0; i < s.size(); ++i) {
        v(static_cast<Eigen::Index>(i)) = s.get(i) ? 1.0 : 0.0;
    }
    return v;
}

/// Error target as a length-2n vector: x bits then z bits.
inline Eigen::VectorXd encode_error(const PauliString& e) {
    std::size_t n = e.num_qubits();
    Eigen::VectorXd v(static_cast<Eigen::Index>(2 * n));
    for (std::size_t i = 0; i < n; ++i) {
        v(static_cast<Eigen::Index>(i)) = e.x_bits().get(i) ? 1.0 : 0.0;
        v(static_cast<Eigen::Index>(n + i)) = e.z_bits().get(i) ? 1.0 : 0.0;
    }
    return v;
}

/// Thresholds a 2n-component network output at 0.5 (exactly 0.5 maps to 0)
/// and decodes the (x|z) halves into a Pauli string.
inline PauliString decode_output(const Eigen::VectorXd& y) {
    if (y.size() % 2 != 0) {
        throw std::invalid_argument("output length must be even");
    }
    std::size_t n = static_cast<std::size_t>(y.size()) / 2;
    BitVector x(n);
    BitVector z(n);
    for (std::size_t i = 0; i < n; ++i) {
        x.set(i, y(static_cast<Eigen::Index>(i)) > 0.5);
        z.set(i, y(static_cast<Eigen::Index>(n + i)) > 0.5);
    }
    return PauliString(std::move(x), std::move(z));
}

inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> dataset_to_matrices(const DecoderDataset& ds) {
    Eigen::MatrixXd inputs(static_cast<Eigen::Index>(ds.syndrome_bits),
                           static_cast<Eigen::Index>(ds.samples.size()));
    Eigen::MatrixXd targets(static_cast<Eigen::Index>(2 * ds.num_qubits),
                            static_cast<Eigen::Index>(ds.samples.size()));
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        inputs.col(static_cast<Eigen::Index>(i)) = encode_syndrome(ds.samples[i].syndrome);
        targets.col(static_cast<Eigen::Index>(i)) = encode_error(ds.samples[i].error);
    }
    return {std::move(inputs), std::move(targets)};
}

struct DecoderTrainSpec {
    std::size_t hidden_layers = 5;
    std::size_t hidden_width = 100;
    std::size_t n_samples = 5000;
    std::optional<Labeling> labeling;  // unset: exact-map when enumerable, else empirical
    std::size_t exact_map_max_qubits = 10;
    TrainConfig train;
};

/// Trains the syndrome-to-error network: input n-k, sigmoid output 2n,
/// binary cross-entropy. All randomness is derived from spec.train.seed.
inline MlpModel train_decoder(const StabilizerCode& code, const ChannelParams& params,
                              const DecoderTrainSpec& spec) {
    Labeling labeling = spec.labeling.value_or(code.num_qubits() <= spec.exact_map_max_qubits
                                                   ? Labeling::exact_map
                                                   : Labeling::empirical_map);
    Rng base(spec.train.seed);
    Rng data_rng = base.derive(1);
    Rng init_rng = base.derive(2);
    DecoderDataset ds = generate_dataset(code, params, spec.n_samples, labeling, data_rng,
                                         spec.exact_map_max_qubits);
    auto [inputs, targets] = dataset_to_matrices(ds);

    std::vector<std::size_t> sizes;
    sizes.push_back(code.num_generators());
    for (std::size_t i = 0; i < spec.hidden_layers; ++i) {
        sizes.push_back(spec.hidden_width);
    }
    sizes.push_back(2 * code.num_qubits());
    MlpModel model = MlpModel::init(std::move(sizes), OutputActivation::sigmoid, init_rng);
    train(model, inputs, targets, Loss::bce, spec.train);
    return model;
}

inline PauliString nn_decode(const MlpModel& model, const BitVector& s) {
    if (s.size() != model.input_size()) {
        throw std::invalid_argument("syndrome length does not match network input");
    }
    return decode_output(model.forward(encode_syndrome(s)));
}

using DecodeFn = std::function<PauliString(const BitVector&)>;

struct EvalResult {
    std::size_t n_trials = 0;
    std::size_t failures = 0;
    double failure_rate = 0.0;
    double ci95 = 0.0;
};

/// Monte Carlo estimate of Pr(decoded error != channel error) under the
/// exact-pattern metric. Trial i uses the stream derived from (rng seed, i),
/// so results are independent of evaluation order and thread count.
inline EvalResult evaluate_decoder(const DecodeFn& decode, const StabilizerCode& code,
                                   const ChannelParams& params, std::size_t n_trials,
                                   const Rng& rng) {
    if (n_trials < 1) {
        throw std::invalid_argument("evaluation needs at least one trial");
    }
    std::size_t failures = 0;
    for (std::size_t i = 0; i < n_trials; ++i) {
        Rng trial_rng = rng.derive(i);
        PauliString e = sample_error(params, code.num_qubits(), trial_rng);
        PauliString corrected = decode(syndrome(code, e));
        if (!(corrected == e)) {
            ++failures;
        }
    }
    EvalResult r;
    r.n_trials = n_trials;
    r.failures = failures;
    r.failure_rate = static_cast<double>(failures) / static_cast<double>(n_trials);
    r.ci95 = 1.96 * std::sqrt(r.failure_rate * (1.0 - r.failure_rate) /
                              static_cast<double>(n_trials));
    return r;
}

/// Exact failure probability of any deterministic decoder on a code whose
/// syndrome space is enumerable: a decode whose correction has a different
/// syndrome never matches, otherwise exactly its own channel probability
/// succeeds.
inline double exact_decoder_failure_rate(const DecodeFn& decode, const StabilizerCode& code,
                                         const ChannelParams& params,
                                         std::size_t max_qubits = 10) {
    if (code.num_qubits() > max_qubits) {
        throw std::invalid_argument("exact evaluation infeasible: code exceeds " +
                                    std::to_string(max_qubits) + " qubits");
    }
    std::size_t bits = code.num_generators();
    double success = 0.0;
    for (uint64_t key = 0; key < (uint64_t{1} << bits); ++key) {
        BitVector s(bits);
        for (std::size_t i = 0; i < bits; ++i) {
            s.set(i, (key >> i) & 1);
        }
        PauliString e = decode(s);
        if (syndrome(code, e) == s) {
            success += error_probability(e, params);
        }
    }
    return 1.0 - success;
}

inline void save_dataset(const std::string& path, const DecoderDataset& ds) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot open for writing: " + path);
    }
    nlohmann::json header;
    header["type"] = "header";
    header["n"] = ds.num_qubits;
    header["syndrome_bits"] = ds.syndrome_bits;
    header["channel"] = {{"px", ds.channel.px}, {"py", ds.channel.py}, {"pz", ds.channel.pz}};
    header["labeling"] = labeling_name(ds.labeling);
    header["n_samples"] = ds.samples.size();
    out << header.dump() << '\n';
    for (const LabeledSample& sample : ds.samples) {
        nlohmann::json rec;
        rec["s"] = sample.syndrome.to_string();
        rec["e"] = sample.error.to_string();
        out << rec.dump() << '\n';
    }
    if (!out) {
        throw std::runtime_error("write failed: " + path);
    }
}

inline DecoderDataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open: " + path);
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw std::runtime_error("dataset file is empty");
    }
    nlohmann::json header = nlohmann::json::parse(line);
    if (header.value("type", "") != "header") {
        throw std::runtime_error("dataset file does not start with a header record");
    }
    DecoderDataset ds;
    ds.num_qubits = header.at("n").get<std::size_t>();
    ds.syndrome_bits = header.at("syndrome_bits").get<std::size_t>();
    const auto& c = header.at("channel");
    ds.channel = ChannelParams(c.at("px").get<double>(), c.at("py").get<double>(),
                               c.at("pz").get<double>());
    ds.labeling = header.at("labeling").get<std::string>() == "exact-map"
                      ? Labeling::exact_map
                      : Labeling::empirical_map;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        nlohmann::json rec = nlohmann::json::parse(line);
        ds.samples.push_back({BitVector::from_string(rec.at("s").get<std::string>()),
                              PauliString::from_string(rec.at("e").get<std::string>())});
    }
    if (ds.samples.size() != header.at("n_samples").get<std::size_t>()) {
        throw std::runtime_error("dataset record count does not match header");
    }
    return ds;
}

}  // namespace qeclab
