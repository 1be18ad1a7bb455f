// Command-line driver: code construction, validation, decoder training,
// Monte Carlo sweeps, reinforcement-learning code search and report
// post-processing. All randomness is governed by --seed.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "qeclab/codes.hpp"
#include "qeclab/decoders.hpp"
#include "qeclab/dqn.hpp"
#include "qeclab/gf2.hpp"
#include "qeclab/harness.hpp"
#include "qeclab/mlp.hpp"
#include "qeclab/nn_decoder.hpp"
#include "qeclab/pauli.hpp"
#include "qeclab/rng.hpp"

namespace {

using namespace qeclab;

StabilizerCode load_code_argument(const std::string& code_arg) {
    if (code_arg == "five-qubit") {
        return five_qubit_code();
    }
    return load_code(code_arg);
}

int cmd_build_code(const std::string& h_path, const std::string& out_path) {
    BinaryMatrix h = load_matrix_text(h_path);
    auto [hx, hz] = hypergraph_product(h);
    StabilizerCode code = css_check_matrix(hx, hz);
    save_code(out_path, code);
    auto [n, k] = code_params(code);
    std::cout << "wrote [[" << n << "," << k << "]] code with " << code.num_generators()
              << " generators to " << out_path << "\n";
    return 0;
}

int cmd_validate(const std::string& code_path) {
    std::ifstream in(code_path);
    if (!in) {
        throw std::runtime_error("cannot open: " + code_path);
    }
    nlohmann::json j;
    in >> j;
    StabilizerCode code = code_from_json(j);  // throws with the violated invariant
    std::cout << "ok: [[" << code.num_qubits() << "," << code.num_logical() << "]] code, "
              << code.num_generators() << " generators commute and are independent\n";
    if (code.css_parts()) {
        std::cout << "ok: CSS pair with orthogonal H_X and H_Z\n";
    }
    return 0;
}

int cmd_train_decoder(const std::string& code_arg, double px, double py, double pz,
                      const DecoderTrainSpec& spec, const std::string& out_path) {
    StabilizerCode code = load_code_argument(code_arg);
    ChannelParams params(px, py, pz);
    MlpModel model = train_decoder(code, params, spec);
    save_model(out_path, model);
    EvalResult eval = evaluate_decoder([&](const BitVector& s) { return nn_decode(model, s); },
                                       code, params, 2000, Rng(spec.train.seed).derive(77));
    std::cout << "trained decoder saved to " << out_path << "; spot failure rate "
              << format_double(eval.failure_rate) << " +- " << format_double(eval.ci95)
              << " at 2000 trials\n";
    return 0;
}

int cmd_simulate(const std::string& config_path, std::optional<uint64_t> seed_override,
                 std::size_t threads_override) {
    ExperimentConfig cfg = load_experiment_config(config_path);
    if (seed_override) {
        cfg.seed = *seed_override;
        cfg.raw["seed"] = *seed_override;
    }
    if (threads_override > 0) {
        cfg.threads = threads_override;
    }
    TrialReport report = run_sweep(cfg);
    write_report(cfg, report);
    std::size_t skipped = 0;
    for (const CellResult& cell : report.cells) {
        if (cell.skipped) {
            ++skipped;
        }
    }
    std::cout << "wrote " << cfg.output << ".csv and " << cfg.output << ".json ("
              << report.cells.size() << " cells, " << skipped << " skipped)\n";
    return 0;
}

int cmd_learn_code(const std::string& h_path, double px, double py, double pz, RLConfig cfg,
                   const std::string& out_prefix) {
    BinaryMatrix seed_h = load_matrix_text(h_path);
    ChannelParams channel(px, py, pz);
    LearnCodeResult result = learn_code(seed_h, channel, cfg);

    save_training_log(out_prefix + "_log.jsonl", result.log);
    save_model(out_prefix + "_qnet.json", result.qnet);
    save_matrix_text(out_prefix + "_h_final.txt", result.h_final);

    auto emit_code = [&](const BinaryMatrix& h, const std::string& suffix) {
        auto [hx, hz] = hypergraph_product(h);
        StabilizerCode code = css_check_matrix(hx, hz);
        save_code(out_prefix + suffix, code);
        return code_params(code);
    };
    if (rank(result.h_final) == result.h_final.rows()) {
        emit_code(result.h_final, "_final.json");
    } else {
        std::cout << "final state is rank deficient; no final code emitted\n";
    }
    if (result.best_found) {
        save_matrix_text(out_prefix + "_h_best.txt", result.h_best);
        auto [n, k] = emit_code(result.h_best, "_best.json");
        std::cout << "best full-rank state: [[" << n << "," << k << "]] code, reward "
                  << format_double(result.best_reward) << "\n";
        if (!(result.h_best == result.h_final)) {
            std::cout << "note: best state differs from the final state; comparisons "
                         "should use the best state\n";
        }
    } else {
        std::cout << "no full-rank state encountered; only the log was written\n";
    }
    std::cout << "wrote " << out_prefix << "_log.jsonl (" << result.log.size() << " steps)\n";
    return 0;
}

int cmd_report(const std::string& report_path, const std::string& out_dir) {
    std::ifstream in(report_path);
    if (!in) {
        throw std::runtime_error("cannot open: " + report_path);
    }
    nlohmann::json report;
    in >> report;
    auto split = report_split_csv(report);
    for (const auto& [decoder, csv] : split) {
        std::string path = out_dir + "/" + decoder + ".csv";
        write_text_file(path, csv);
        std::cout << "wrote " << path << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"machine-learning-assisted stabilizer code laboratory"};
    app.require_subcommand(1);

    // build-code
    std::string h_path, out_path;
    auto* build = app.add_subcommand("build-code",
                                     "hypergraph product of a classical parity-check matrix");
    build->set_help_flag("--help", "print help");  // frees --h for the matrix argument
    build->add_option("--h", h_path, "classical parity-check matrix (text)")->required();
    build->add_option("--out", out_path, "output code file (JSON)")->required();

    // validate
    std::string code_path;
    auto* validate = app.add_subcommand("validate", "check the invariants of a code file");
    validate->add_option("code", code_path, "code file (JSON)")->required();

    // train-decoder
    std::string td_code = "five-qubit";
    double td_px = 0.1, td_py = 0.1, td_pz = 0.1;
    DecoderTrainSpec spec;
    std::string td_out;
    std::string td_labeling = "auto";
    auto* td = app.add_subcommand("train-decoder", "train a syndrome-to-error network");
    td->add_option("--code", td_code, "built-in code name or code file");
    td->add_option("--px", td_px, "X probability")->required();
    td->add_option("--py", td_py, "Y probability")->required();
    td->add_option("--pz", td_pz, "Z probability")->required();
    td->add_option("--samples", spec.n_samples, "training draws");
    td->add_option("--epochs", spec.train.epochs, "training epochs");
    td->add_option("--batch", spec.train.batch_size, "minibatch size");
    td->add_option("--lr", spec.train.learning_rate, "Adam learning rate");
    td->add_option("--hidden-layers", spec.hidden_layers, "hidden layer count");
    td->add_option("--hidden-width", spec.hidden_width, "hidden layer width");
    td->add_option("--labeling", td_labeling, "exact-map, empirical-map or auto");
    td->add_option("--seed", spec.train.seed, "random seed");
    td->add_option("--out", td_out, "model checkpoint path")->required();

    // simulate
    std::string sim_config;
    std::optional<uint64_t> sim_seed;
    std::size_t sim_threads = 0;
    auto* sim = app.add_subcommand("simulate", "run a sweep described by a config file");
    sim->add_option("config", sim_config, "experiment config (JSON)")->required();
    uint64_t sim_seed_value = 0;
    auto* seed_opt = sim->add_option("--seed", sim_seed_value, "override the config seed");
    sim->add_option("--threads", sim_threads, "worker threads (default: QECLAB_THREADS)");

    // learn-code
    std::string lc_h, lc_prefix;
    double lc_px = 0.3, lc_py = 0.03, lc_pz = 0.03;
    RLConfig rl;
    auto* lc = app.add_subcommand("learn-code", "search parity-check matrices with a DQN agent");
    lc->set_help_flag("--help", "print help");
    lc->add_option("--h", lc_h, "seed parity-check matrix (text)")->required();
    lc->add_option("--px", lc_px, "X probability")->required();
    lc->add_option("--py", lc_py, "Y probability")->required();
    lc->add_option("--pz", lc_pz, "Z probability")->required();
    lc->add_option("--episodes", rl.episodes, "episodes");
    lc->add_option("--steps", rl.steps_per_episode, "steps per episode");
    lc->add_option("--gamma", rl.gamma, "discount factor");
    lc->add_option("--q-lr", rl.q_learning_rate, "Q network learning rate");
    lc->add_option("--replay-capacity", rl.replay_capacity, "replay memory capacity");
    lc->add_option("--minibatch", rl.minibatch_size, "replay minibatch size");
    lc->add_option("--reward-samples", rl.reward.budget.dataset_samples,
                   "decoder training draws per reward");
    lc->add_option("--reward-epochs", rl.reward.budget.decoder_epochs,
                   "decoder epochs per reward");
    lc->add_option("--reward-trials", rl.reward.budget.evaluation_trials,
                   "evaluation trials per reward");
    lc->add_option("--seed", rl.seed, "random seed");
    lc->add_option("--out-prefix", lc_prefix, "output file prefix")->required();

    // report
    std::string rep_path, rep_dir = ".";
    auto* rep = app.add_subcommand("report", "split a JSON report into per-decoder CSV files");
    rep->add_option("report", rep_path, "sweep report (JSON)")->required();
    rep->add_option("--out-dir", rep_dir, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (build->parsed()) {
            return cmd_build_code(h_path, out_path);
        }
        if (validate->parsed()) {
            return cmd_validate(code_path);
        }
        if (td->parsed()) {
            if (td_labeling == "exact-map") {
                spec.labeling = Labeling::exact_map;
            } else if (td_labeling == "empirical-map") {
                spec.labeling = Labeling::empirical_map;
            } else if (td_labeling != "auto") {
                throw std::invalid_argument("unknown labeling: " + td_labeling);
            }
            return cmd_train_decoder(td_code, td_px, td_py, td_pz, spec, td_out);
        }
        if (sim->parsed()) {
            if (seed_opt->count() > 0) {
                sim_seed = sim_seed_value;
            }
            return cmd_simulate(sim_config, sim_seed, sim_threads);
        }
        if (lc->parsed()) {
            return cmd_learn_code(lc_h, lc_px, lc_py, lc_pz, rl, lc_prefix);
        }
        if (rep->parsed()) {
            return cmd_report(rep_path, rep_dir);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
