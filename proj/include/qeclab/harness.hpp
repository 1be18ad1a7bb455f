#pragma once

#include <atomic>
#include <charconv>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "qeclab/codes.hpp"
#include "qeclab/decoders.hpp"
#include "qeclab/gf2.hpp"
#include "qeclab/nn_decoder.hpp"
#include "qeclab/pauli.hpp"
#include "qeclab/rng.hpp"

namespace qeclab {

/// Shortest decimal form that round-trips the double exactly.
inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline uint64_t fnv1a64(std::string_view text) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string hex64(uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return s;
}

/// Runs fn(0..n-1) on a small worker pool. Results must be written to
/// per-index slots; the work-stealing order never affects them.
inline void parallel_for(std::size_t n, std::size_t threads,
                         const std::function<void(std::size_t)>& fn) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> cursor{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&]() {
        while (true) {
            std::size_t i = cursor.fetch_add(1);
            if (i >= n) {
                return;
            }
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) {
                    error = std::current_exception();
                }
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < std::min(threads, n); ++t) {
        pool.emplace_back(worker);
    }
    for (auto& t : pool) {
        t.join();
    }
    if (error) {
        std::rethrow_exception(error);
    }
}

inline std::size_t default_thread_count() {
    if (const char* env = std::getenv("QECLAB_THREADS")) {
        char* end = nullptr;
        long v = std::strtol(env, &end, 10);
        if (end != env && v > 0) {
            return static_cast<std::size_t>(v);
        }
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
}

struct ChannelPoint {
    double px = 0.0;
    double py = 0.0;
    double pz = 0.0;
};

struct NnSweepSpec {
    std::size_t samples = 5000;
    std::size_t epochs = 1000;
    std::size_t batch_size = 100;
    double learning_rate = 0.01;
    std::size_t hidden_layers = 5;
    std::size_t hidden_width = 100;
    std::optional<Labeling> labeling;
};

struct ExperimentConfig {
    // Exactly one code source.
    std::string builtin;
    std::string code_file;
    std::string classical_h_file;
    std::string construction;  // "hypergraph-product" with classical_h_file

    std::vector<std::string> decoders;
    std::vector<ChannelPoint> points;
    std::size_t n_trials = 25000;
    uint64_t seed = 0;
    std::string output;
    NnSweepSpec nn;
    bool ssf_css_restricted = false;
    std::string evaluation = "monte-carlo";  // or "exact"
    std::size_t threads = 0;                 // 0: QECLAB_THREADS or hardware
    std::string code_name;                   // derived from the source when empty

    nlohmann::json raw;  // canonical parsed config, hashed for provenance
};

namespace detail {

inline const nlohmann::json& require_field(const nlohmann::json& j, const std::string& key) {
    if (!j.contains(key)) {
        throw std::invalid_argument("config field '" + key + "' is missing");
    }
    return j.at(key);
}

template <typename T>
T field_as(const nlohmann::json& j, const std::string& key) {
    try {
        return require_field(j, key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw std::invalid_argument("config field '" + key + "' is malformed");
    }
}

template <typename T>
T field_or(const nlohmann::json& j, const std::string& key, T fallback) {
    if (!j.contains(key)) {
        return fallback;
    }
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw std::invalid_argument("config field '" + key + "' is malformed");
    }
}

inline std::string path_stem(const std::string& path) {
    std::size_t slash = path.find_last_of('/');
    std::string name = slash == std::string::npos ? path : path.substr(slash + 1);
    std::size_t dot = name.find_last_of('.');
    return dot == std::string::npos ? name : name.substr(0, dot);
}

}  // namespace detail

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
    ExperimentConfig cfg;
    cfg.raw = j;

    const nlohmann::json& code = detail::require_field(j, "code");
    cfg.builtin = detail::field_or<std::string>(code, "builtin", "");
    cfg.code_file = detail::field_or<std::string>(code, "file", "");
    cfg.classical_h_file = detail::field_or<std::string>(code, "classical_h", "");
    cfg.construction = detail::field_or<std::string>(code, "construction", "");
    int sources = (!cfg.builtin.empty()) + (!cfg.code_file.empty()) +
                  (!cfg.classical_h_file.empty());
    if (sources != 1) {
        throw std::invalid_argument(
            "config field 'code' must name exactly one of builtin, file, classical_h");
    }
    if (!cfg.classical_h_file.empty() && cfg.construction != "hypergraph-product") {
        throw std::invalid_argument(
            "config field 'code.construction' must be \"hypergraph-product\"");
    }

    cfg.decoders = detail::field_as<std::vector<std::string>>(j, "decoders");
    if (cfg.decoders.empty()) {
        throw std::invalid_argument("config field 'decoders' must be nonempty");
    }
    for (const std::string& d : cfg.decoders) {
        if (d != "lookup" && d != "small-set-flip" && d != "nn" && d != "exact-map") {
            throw std::invalid_argument("config field 'decoders' names unknown decoder '" + d +
                                        "'");
        }
    }

    const nlohmann::json& channel = detail::require_field(j, "channel");
    if (channel.contains("list")) {
        for (const auto& p : channel.at("list")) {
            cfg.points.push_back({detail::field_as<double>(p, "px"),
                                  detail::field_as<double>(p, "py"),
                                  detail::field_as<double>(p, "pz")});
        }
    } else {
        double px_min = detail::field_as<double>(channel, "px_min");
        double px_max = detail::field_as<double>(channel, "px_max");
        std::size_t count = detail::field_as<std::size_t>(channel, "points");
        double ry = detail::field_or<double>(channel, "py_ratio", 1.0);
        double rz = detail::field_or<double>(channel, "pz_ratio", 1.0);
        if (count < 1) {
            throw std::invalid_argument("config field 'channel.points' must be positive");
        }
        for (std::size_t i = 0; i < count; ++i) {
            double px = count == 1 ? px_min
                                   : px_min + (px_max - px_min) * static_cast<double>(i) /
                                                  static_cast<double>(count - 1);
            cfg.points.push_back({px, ry * px, rz * px});
        }
    }
    if (cfg.points.empty()) {
        throw std::invalid_argument("config field 'channel' resolves to an empty grid");
    }
    for (const ChannelPoint& p : cfg.points) {
        ChannelParams validate(p.px, p.py, p.pz);  // throws on invalid probabilities
        (void)validate;
    }

    cfg.n_trials = detail::field_as<std::size_t>(j, "n_trials");
    if (cfg.n_trials < 1) {
        throw std::invalid_argument("config field 'n_trials' must be positive");
    }
    cfg.seed = detail::field_or<uint64_t>(j, "seed", 0);
    cfg.output = detail::field_as<std::string>(j, "output");

    if (j.contains("nn")) {
        const auto& nn = j.at("nn");
        cfg.nn.samples = detail::field_or<std::size_t>(nn, "samples", cfg.nn.samples);
        cfg.nn.epochs = detail::field_or<std::size_t>(nn, "epochs", cfg.nn.epochs);
        cfg.nn.batch_size = detail::field_or<std::size_t>(nn, "batch_size", cfg.nn.batch_size);
        cfg.nn.learning_rate =
            detail::field_or<double>(nn, "learning_rate", cfg.nn.learning_rate);
        cfg.nn.hidden_layers =
            detail::field_or<std::size_t>(nn, "hidden_layers", cfg.nn.hidden_layers);
        cfg.nn.hidden_width =
            detail::field_or<std::size_t>(nn, "hidden_width", cfg.nn.hidden_width);
        if (nn.contains("labeling")) {
            std::string lab = detail::field_as<std::string>(nn, "labeling");
            if (lab == "exact-map") {
                cfg.nn.labeling = Labeling::exact_map;
            } else if (lab == "empirical-map") {
                cfg.nn.labeling = Labeling::empirical_map;
            } else if (lab != "auto") {
                throw std::invalid_argument("config field 'nn.labeling' is malformed");
            }
        }
    }
    if (j.contains("ssf")) {
        cfg.ssf_css_restricted =
            detail::field_or<bool>(j.at("ssf"), "css_restricted", false);
    }
    cfg.evaluation = detail::field_or<std::string>(j, "evaluation", "monte-carlo");
    if (cfg.evaluation != "monte-carlo" && cfg.evaluation != "exact") {
        throw std::invalid_argument("config field 'evaluation' is malformed");
    }
    cfg.threads = detail::field_or<std::size_t>(j, "threads", 0);

    if (!cfg.builtin.empty()) {
        if (cfg.builtin != "five-qubit") {
            throw std::invalid_argument("config field 'code.builtin' names unknown code '" +
                                        cfg.builtin + "'");
        }
        cfg.code_name = cfg.builtin;
    } else if (!cfg.code_file.empty()) {
        cfg.code_name = detail::path_stem(cfg.code_file);
    } else {
        cfg.code_name = detail::path_stem(cfg.classical_h_file) + "-hgp";
    }
    if (j.contains("code_name")) {
        cfg.code_name = detail::field_as<std::string>(j, "code_name");
    }
    return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open: " + path);
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("config file is not valid JSON: " + std::string(e.what()));
    }
    return config_from_json(j);
}

inline StabilizerCode load_configured_code(const ExperimentConfig& cfg) {
    if (!cfg.builtin.empty()) {
        return five_qubit_code();
    }
    if (!cfg.code_file.empty()) {
        return load_code(cfg.code_file);
    }
    BinaryMatrix h = load_matrix_text(cfg.classical_h_file);
    auto [hx, hz] = hypergraph_product(h);
    return css_check_matrix(hx, hz);
}

struct CellResult {
    ChannelPoint point;
    std::string decoder;
    bool skipped = false;
    std::string skip_reason;
    std::string method = "monte-carlo";
    std::size_t n_trials = 0;
    std::size_t failures = 0;
    double failure_rate = 0.0;
    double ci95 = 0.0;
    double wall_time_s = 0.0;
};

struct TrialReport {
    std::string code_name;
    std::size_t n = 0;
    std::size_t k = 0;
    uint64_t seed = 0;
    std::string config_hash;
    nlohmann::json config;
    std::vector<CellResult> cells;  // decoder-major, channel-point-minor
};

/// Evaluates every (decoder, channel point) cell. Cells are independent, each
/// derives its own random stream from (seed, cell index), so the report is
/// identical for any thread count. Infeasible combinations become skipped
/// cells carrying the guard message.
inline TrialReport run_sweep(const ExperimentConfig& cfg) {
    StabilizerCode code = load_configured_code(cfg);
    TrialReport report;
    report.code_name = cfg.code_name;
    report.n = code.num_qubits();
    report.k = code.num_logical();
    report.seed = cfg.seed;
    report.config = cfg.raw;
    report.config_hash = hex64(fnv1a64(cfg.raw.dump()));

    // Channel-independent decoders are built once, before the pool.
    std::optional<SyndromeTable> lookup;
    std::string lookup_error;
    std::optional<SmallSetFlipDecoder> ssf;
    std::string ssf_error;
    for (const std::string& d : cfg.decoders) {
        if (d == "lookup" && !lookup && lookup_error.empty()) {
            try {
                lookup = build_lookup_table(code);
            } catch (const std::invalid_argument& e) {
                lookup_error = e.what();
            }
        } else if (d == "small-set-flip" && !ssf && ssf_error.empty()) {
            try {
                SmallSetFlipOptions opts;
                opts.css_restricted = cfg.ssf_css_restricted;
                ssf.emplace(code, opts);
            } catch (const std::invalid_argument& e) {
                ssf_error = e.what();
            }
        }
    }

    std::size_t n_points = cfg.points.size();
    report.cells.resize(cfg.decoders.size() * n_points);
    std::size_t threads = cfg.threads > 0 ? cfg.threads : default_thread_count();

    parallel_for(report.cells.size(), threads, [&](std::size_t idx) {
        std::size_t d = idx / n_points;
        std::size_t p = idx % n_points;
        const std::string& decoder = cfg.decoders[d];
        const ChannelPoint& point = cfg.points[p];
        ChannelParams params(point.px, point.py, point.pz);
        CellResult& cell = report.cells[idx];
        cell.point = point;
        cell.decoder = decoder;
        Rng cell_rng = Rng(cfg.seed).derive(idx);

        auto start = std::chrono::steady_clock::now();
        try {
            DecodeFn fn;
            if (decoder == "lookup") {
                if (!lookup) {
                    throw std::invalid_argument(lookup_error);
                }
                fn = [&](const BitVector& s) { return table_decode(*lookup, s); };
            } else if (decoder == "small-set-flip") {
                if (!ssf) {
                    throw std::invalid_argument(ssf_error);
                }
                fn = [&](const BitVector& s) { return ssf->decode(s); };
            } else if (decoder == "exact-map") {
                auto table = std::make_shared<SyndromeTable>(build_map_table(code, params));
                fn = [table](const BitVector& s) { return table_decode(*table, s); };
            } else {  // nn
                DecoderTrainSpec spec;
                spec.hidden_layers = cfg.nn.hidden_layers;
                spec.hidden_width = cfg.nn.hidden_width;
                spec.n_samples = cfg.nn.samples;
                spec.labeling = cfg.nn.labeling;
                spec.train.batch_size = cfg.nn.batch_size;
                spec.train.epochs = cfg.nn.epochs;
                spec.train.learning_rate = cfg.nn.learning_rate;
                spec.train.seed = cell_rng.derive(1).seed();
                auto model = std::make_shared<MlpModel>(train_decoder(code, params, spec));
                fn = [model](const BitVector& s) { return nn_decode(*model, s); };
            }

            if (cfg.evaluation == "exact") {
                cell.method = "exact";
                cell.failure_rate = exact_decoder_failure_rate(fn, code, params);
                cell.n_trials = 0;
                cell.failures = 0;
                cell.ci95 = 0.0;
            } else {
                EvalResult eval =
                    evaluate_decoder(fn, code, params, cfg.n_trials, cell_rng.derive(2));
                cell.n_trials = eval.n_trials;
                cell.failures = eval.failures;
                cell.failure_rate = eval.failure_rate;
                cell.ci95 = eval.ci95;
            }
        } catch (const std::invalid_argument& e) {
            cell.skipped = true;
            cell.skip_reason = e.what();
        }
        cell.wall_time_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    });
    return report;
}

inline constexpr const char* kCsvHeader =
    "px,py,pz,code,decoder,n_trials,failures,failure_rate,ci95";

/// Deterministic CSV: skipped cells are omitted, wall time never appears.
inline std::string report_to_csv(const TrialReport& report) {
    std::string out = kCsvHeader;
    out += '\n';
    for (const CellResult& cell : report.cells) {
        if (cell.skipped) {
            continue;
        }
        out += format_double(cell.point.px);
        out += ',';
        out += format_double(cell.point.py);
        out += ',';
        out += format_double(cell.point.pz);
        out += ',';
        out += report.code_name;
        out += ',';
        out += cell.decoder;
        out += ',';
        out += std::to_string(cell.n_trials);
        out += ',';
        out += std::to_string(cell.failures);
        out += ',';
        out += format_double(cell.failure_rate);
        out += ',';
        out += format_double(cell.ci95);
        out += '\n';
    }
    return out;
}

inline nlohmann::json report_to_json(const TrialReport& report) {
    nlohmann::json j;
    j["code"] = report.code_name;
    j["n"] = report.n;
    j["k"] = report.k;
    j["seed"] = report.seed;
    j["config_hash"] = report.config_hash;
    j["config"] = report.config;
    nlohmann::json cells = nlohmann::json::array();
    for (const CellResult& cell : report.cells) {
        nlohmann::json c;
        c["px"] = cell.point.px;
        c["py"] = cell.point.py;
        c["pz"] = cell.point.pz;
        c["decoder"] = cell.decoder;
        if (cell.skipped) {
            c["skipped"] = true;
            c["skip_reason"] = cell.skip_reason;
        } else {
            c["method"] = cell.method;
            c["n_trials"] = cell.n_trials;
            c["failures"] = cell.failures;
            c["failure_rate"] = cell.failure_rate;
            c["ci95"] = cell.ci95;
        }
        c["wall_time_s"] = cell.wall_time_s;
        cells.push_back(std::move(c));
    }
    j["cells"] = std::move(cells);
    return j;
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot open for writing: " + path);
    }
    out << content;
    if (!out) {
        throw std::runtime_error("write failed: " + path);
    }
}

/// Writes <output>.csv and <output>.json.
inline void write_report(const ExperimentConfig& cfg, const TrialReport& report) {
    write_text_file(cfg.output + ".csv", report_to_csv(report));
    write_text_file(cfg.output + ".json", report_to_json(report).dump(2) + "\n");
}

/// Splits a JSON report into one plot-ready CSV per decoder:
/// px,failure_rate,ci95 rows in grid order.
inline std::vector<std::pair<std::string, std::string>> report_split_csv(
    const nlohmann::json& report) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& cell : report.at("cells")) {
        if (cell.value("skipped", false)) {
            continue;
        }
        std::string decoder = cell.at("decoder").get<std::string>();
        std::string* body = nullptr;
        for (auto& [name, text] : out) {
            if (name == decoder) {
                body = &text;
                break;
            }
        }
        if (!body) {
            out.emplace_back(decoder, "px,failure_rate,ci95\n");
            body = &out.back().second;
        }
        *body += format_double(cell.at("px").get<double>());
        *body += ',';
        *body += format_double(cell.at("failure_rate").get<double>());
        *body += ',';
        *body += format_double(cell.at("ci95").get<double>());
        *body += '\n';
    }
    return out;
}

}  // namespace qeclab
