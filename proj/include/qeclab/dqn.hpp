#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "qeclab/codes.hpp"
#include "qeclab/gf2.hpp"
#include "qeclab/mlp.hpp"
#include "qeclab/nn_decoder.hpp"
#include "qeclab/pauli.hpp"
#include "qeclab/rng.hpp"

namespace qeclab {

/// Cost caps for one reward evaluation; the full-budget decoder settings are
/// reserved for final re-evaluation of reported codes.
struct RewardBudget {
    std::size_t dataset_samples = 2000;
    std::size_t decoder_epochs = 200;
    std::size_t evaluation_trials = 2000;
};

struct RewardSpec {
    RewardBudget budget;
    /// When set, rank-deficient states take the rank penalty without paying
    /// for decoder training.
    bool fast_fail_rank_deficient = true;
    std::size_t decoder_hidden_layers = 5;
    std::size_t decoder_hidden_width = 100;
    std::size_t decoder_batch_size = 100;
    double decoder_learning_rate = 0.01;
};

struct RLConfig {
    std::size_t steps_per_episode = 32;
    std::size_t episodes = 6;
    double gamma = 0.99;
    double epsilon_start = 1.0;
    double epsilon_end = 0.1;  // reached linearly over the first half of all steps
    double q_learning_rate = 0.001;
    std::size_t replay_capacity = 10000;
    std::size_t minibatch_size = 32;
    std::size_t target_sync_interval = 1;
    std::size_t qnet_hidden_width = 128;  // two hidden layers
    bool allow_rank_deficient_seed = false;
    uint64_t seed = 0;
    RewardSpec reward;
};

struct Transition {
    BinaryMatrix state;
    std::size_t action;
    double reward;
    BinaryMatrix next_state;
};

/// Bounded FIFO of transitions with uniform sampling over current contents.
class ReplayMemory {
  public:
    explicit ReplayMemory(std::size_t capacity) : capacity_(capacity) {
        if (capacity < 1) {
            throw std::invalid_argument("replay capacity must be positive");
        }
    }

    void push(Transition t) {
        if (buffer_.size() == capacity_) {
            buffer_.pop_front();
        }
        buffer_.push_back(std::move(t));
    }

    std::size_t size() const {
        return buffer_.size();
    }

    std::size_t capacity() const {
        return capacity_;
    }

    const Transition& operator[](std::size_t i) const {
        return buffer_[i];
    }

    std::vector<const Transition*> sample(std::size_t count, Rng& rng) const {
        if (buffer_.empty()) {
            throw std::invalid_argument("cannot sample from an empty replay memory");
        }
        std::vector<const Transition*> out;
        out.reserve(count);
        for (std::size_t i = 0; i < count; ++i) {
            out.push_back(&buffer_[rng.uniform_int(buffer_.size())]);
        }
        return out;
    }

  private:
    std::size_t capacity_;
    std::deque<Transition> buffer_;
};

/// Flips exactly the bit addressed row-major by the action index.
inline BinaryMatrix env_step(const BinaryMatrix& h, std::size_t action) {
    if (action >= h.rows() * h.cols()) {
        throw std::invalid_argument("action index out of range");
    }
    BinaryMatrix next = h;
    std::size_t r = action / h.cols();
    std::size_t c = action % h.cols();
    next.set(r, c, !next.get(r, c));
    return next;
}

inline Eigen::VectorXd flatten_state(const BinaryMatrix& h) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(h.rows() * h.cols()));
    for (std::size_t r = 0; r < h.rows(); ++r) {
        for (std::size_t c = 0; c < h.cols(); ++c) {
            v(static_cast<Eigen::Index>(r * h.cols() + c)) = h.get(r, c) ? 1.0 : 0.0;
        }
    }
    return v;
}

struct RewardOutcome {
    double reward = 0.0;
    std::size_t rank = 0;
    double failure_rate = 0.0;
    bool built = false;
};

/// Scores a candidate parity-check matrix: -(decoder failure rate) plus the
/// rank-deficiency penalty rank(H) - n1. Full-rank states are built into
/// their hypergraph-product code and decoded by a freshly trained network
/// under the given budget; unbuildable states score -1 plus the penalty.
inline RewardOutcome compute_reward(const BinaryMatrix& h_next, const ChannelParams& channel,
                                    const RewardSpec& spec, const Rng& rng) {
    RewardOutcome out;
    out.rank = rank(h_next);
    double penalty = static_cast<double>(out.rank) - static_cast<double>(h_next.rows());
    if (out.rank < h_next.rows() && spec.fast_fail_rank_deficient) {
        out.reward = penalty;
        return out;
    }
    try {
        auto [hx, hz] = hypergraph_product(h_next);
        StabilizerCode code = css_check_matrix(hx, hz);
        DecoderTrainSpec dspec;
        dspec.hidden_layers = spec.decoder_hidden_layers;
        dspec.hidden_width = spec.decoder_hidden_width;
        dspec.n_samples = spec.budget.dataset_samples;
        dspec.train.batch_size = spec.decoder_batch_size;
        dspec.train.epochs = spec.budget.decoder_epochs;
        dspec.train.learning_rate = spec.decoder_learning_rate;
        dspec.train.seed = rng.derive(1).seed();
        MlpModel model = train_decoder(code, channel, dspec);
        EvalResult eval = evaluate_decoder(
            [&](const BitVector& s) { return nn_decode(model, s); }, code, channel,
            spec.budget.evaluation_trials, rng.derive(2));
        out.failure_rate = eval.failure_rate;
        out.built = true;
        out.reward = -eval.failure_rate + penalty;
    } catch (const std::exception&) {
        // Unbuildable or untrainable states are penalized, never fatal.
        out.failure_rate = 1.0;
        out.built = false;
        out.reward = -1.0 + penalty;
    }
    return out;
}

/// Epsilon-greedy action choice over the flattened-state Q values; greedy
/// ties resolve to the lowest index.
inline std::size_t select_action(const MlpModel& qnet, const BinaryMatrix& h, double epsilon,
                                 Rng& rng) {
    std::size_t n_actions = h.rows() * h.cols();
    if (qnet.input_size() != n_actions || qnet.output_size() != n_actions) {
        throw std::invalid_argument("Q network shape does not match the state");
    }
    if (rng.uniform01() < epsilon) {
        return rng.uniform_int(n_actions);
    }
    Eigen::VectorXd q = qnet.forward(flatten_state(h));
    std::size_t best = 0;
    for (std::size_t a = 1; a < n_actions; ++a) {
        if (q(static_cast<Eigen::Index>(a)) > q(static_cast<Eigen::Index>(best))) {
            best = a;
        }
    }
    return best;
}

/// One temporal-difference step: targets r + gamma max_a' Q_target(s', a') on
/// the taken action only, squared loss averaged over the batch, one Adam
/// update of qnet. Returns the pre-update loss.
inline double dqn_update(MlpModel& qnet, const MlpModel& target_net,
                         const std::vector<const Transition*>& batch, double gamma,
                         AdamState& adam, const TrainConfig& cfg) {
    if (batch.empty()) {
        throw std::invalid_argument("batch must be nonempty");
    }
    Eigen::Index b = static_cast<Eigen::Index>(batch.size());
    Eigen::MatrixXd states(static_cast<Eigen::Index>(qnet.input_size()), b);
    Eigen::MatrixXd next_states(states.rows(), b);
    for (Eigen::Index i = 0; i < b; ++i) {
        states.col(i) = flatten_state(batch[static_cast<std::size_t>(i)]->state);
        next_states.col(i) = flatten_state(batch[static_cast<std::size_t>(i)]->next_state);
    }
    Eigen::MatrixXd next_q = target_net.forward_batch(next_states);
    Eigen::MatrixXd predicted = qnet.forward_batch(states);
    Eigen::MatrixXd targets = predicted;
    for (Eigen::Index i = 0; i < b; ++i) {
        double td = batch[static_cast<std::size_t>(i)]->reward +
                    gamma * next_q.col(i).maxCoeff();
        targets(static_cast<Eigen::Index>(batch[static_cast<std::size_t>(i)]->action), i) = td;
    }
    Gradients g = grad(qnet, states, targets, Loss::mse);
    adam_step(qnet, adam, g, cfg);
    return g.loss;
}

/// Owns the online and target networks and the update counter; with a sync
/// interval of 1 the target used by update i holds exactly the parameters
/// produced by update i-1.
class DqnTrainer {
  public:
    DqnTrainer(MlpModel qnet, double gamma, double learning_rate, std::size_t sync_interval)
        : qnet_(std::move(qnet)),
          target_(qnet_),
          gamma_(gamma),
          sync_interval_(sync_interval),
          adam_(AdamState::for_model(qnet_)) {
        cfg_.learning_rate = learning_rate;
    }

    double update(const std::vector<const Transition*>& batch) {
        double loss = dqn_update(qnet_, target_, batch, gamma_, adam_, cfg_);
        ++updates_;
        if (sync_interval_ > 0 && updates_ % sync_interval_ == 0) {
            target_ = qnet_;
        }
        return loss;
    }

    const MlpModel& qnet() const {
        return qnet_;
    }

    const MlpModel& target() const {
        return target_;
    }

    std::size_t updates() const {
        return updates_;
    }

  private:
    MlpModel qnet_;
    MlpModel target_;
    double gamma_;
    std::size_t sync_interval_;
    AdamState adam_;
    TrainConfig cfg_;
    std::size_t updates_ = 0;
};

struct StepRecord {
    std::size_t episode = 0;  // 1-based
    std::size_t step = 0;     // 1-based within the episode
    std::size_t action = 0;
    double reward = 0.0;
    std::size_t rank = 0;
    double epsilon = 0.0;
};

struct LearnCodeResult {
    BinaryMatrix h_final;
    BinaryMatrix h_best;
    bool best_found = false;
    double best_reward = 0.0;
    std::vector<StepRecord> log;
    MlpModel qnet;
};

inline void validate_rl_config(const RLConfig& cfg, std::size_t n1, std::size_t n2) {
    if (cfg.gamma <= 0.0 || cfg.gamma >= 1.0) {
        throw std::invalid_argument("gamma must lie strictly between 0 and 1");
    }
    if (cfg.steps_per_episode < 1 || cfg.episodes < 1) {
        throw std::invalid_argument("steps and episodes must be positive");
    }
    if (cfg.epsilon_start < 0.0 || cfg.epsilon_start > 1.0 || cfg.epsilon_end < 0.0 ||
        cfg.epsilon_end > 1.0) {
        throw std::invalid_argument("epsilon schedule must stay in [0, 1]");
    }
    if (cfg.steps_per_episode * cfg.episodes <= n1 * n2) {
        throw std::invalid_argument("total steps must exceed the number of matrix entries");
    }
    if (cfg.minibatch_size < 1) {
        throw std::invalid_argument("minibatch size must be positive");
    }
}

inline double epsilon_at(const RLConfig& cfg, std::size_t global_step) {
    std::size_t total = cfg.steps_per_episode * cfg.episodes;
    std::size_t half = total / 2 > 0 ? total / 2 : 1;
    if (global_step >= half) {
        return cfg.epsilon_end;
    }
    double frac = static_cast<double>(global_step) / static_cast<double>(half);
    return cfg.epsilon_start + (cfg.epsilon_end - cfg.epsilon_start) * frac;
}

/// The encoder-learning loop: episodes restart from the seed matrix; each
/// step selects a bit flip epsilon-greedily, scores the flipped matrix,
/// stores the transition and performs one minibatch update. Returns the final
/// state, the best-reward full-rank state encountered, and the step log.
inline LearnCodeResult learn_code(const BinaryMatrix& seed_h, const ChannelParams& channel,
                                  const RLConfig& cfg) {
    std::size_t n1 = seed_h.rows();
    std::size_t n2 = seed_h.cols();
    validate_rl_config(cfg, n1, n2);
    if (!cfg.allow_rank_deficient_seed && rank(seed_h) < n1) {
        throw std::invalid_argument("seed parity-check matrix is rank deficient");
    }

    Rng root(cfg.seed);
    Rng init_rng = root.derive(1);
    Rng action_rng = root.derive(2);
    Rng replay_rng = root.derive(3);
    Rng reward_root = root.derive(4);

    std::size_t n_actions = n1 * n2;
    MlpModel qnet = MlpModel::init(
        {n_actions, cfg.qnet_hidden_width, cfg.qnet_hidden_width, n_actions},
        OutputActivation::linear, init_rng);
    DqnTrainer trainer(std::move(qnet), cfg.gamma, cfg.q_learning_rate,
                       cfg.target_sync_interval);
    ReplayMemory replay(cfg.replay_capacity);

    LearnCodeResult result{seed_h, seed_h, false, 0.0, {}, trainer.qnet()};
    result.log.reserve(cfg.episodes * cfg.steps_per_episode);

    std::size_t global_step = 0;
    BinaryMatrix state = seed_h;
    for (std::size_t episode = 0; episode < cfg.episodes; ++episode) {
        state = seed_h;
        for (std::size_t step = 0; step < cfg.steps_per_episode; ++step) {
            double eps = epsilon_at(cfg, global_step);
            std::size_t action = select_action(trainer.qnet(), state, eps, action_rng);
            BinaryMatrix next = env_step(state, action);
            RewardOutcome outcome =
                compute_reward(next, channel, cfg.reward, reward_root.derive(global_step));
            replay.push({state, action, outcome.reward, next});
            if (replay.size() >= cfg.minibatch_size) {
                trainer.update(replay.sample(cfg.minibatch_size, replay_rng));
            }
            if (outcome.rank == n1 &&
                (!result.best_found || outcome.reward > result.best_reward)) {
                result.best_found = true;
                result.best_reward = outcome.reward;
                result.h_best = next;
            }
            result.log.push_back(
                {episode + 1, step + 1, action, outcome.reward, outcome.rank, eps});
            state = next;
            ++global_step;
        }
    }
    result.h_final = state;
    result.qnet = trainer.qnet();
    return result;
}

inline void save_training_log(const std::string& path, const std::vector<StepRecord>& log) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot open for writing: " + path);
    }
    for (const StepRecord& rec : log) {
        nlohmann::json j;
        j["episode"] = rec.episode;
        j["step"] = rec.step;
        j["action"] = rec.action;
        j["reward"] = rec.reward;
        j["rank"] = rec.rank;
        j["epsilon"] = rec.epsilon;
        out << j.dump() << '\n';
    }
    if (!out) {
        throw std::runtime_error("write failed: " + path);
    }
}

}  // namespace qeclab
