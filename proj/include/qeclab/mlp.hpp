#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "qeclab/rng.hpp"

namespace qeclab {

enum class OutputActivation { sigmoid, linear };
enum class Loss { mse, bce };

struct TrainConfig {
    std::size_t batch_size = 100;
    std::size_t epochs = 1000;
    double learning_rate = 0.01;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    uint64_t seed = 0;
};

/// Clamped to keep outputs strictly inside (0,1) even for extreme logits.
inline double sigmoid(double z) {
    double c = z < -30.0 ? -30.0 : (z > 30.0 ? 30.0 : z);
    if (c >= 0.0) {
        return 1.0 / (1.0 + std::exp(-c));
    }
    double e = std::exp(c);
    return e / (1.0 + e);
}

namespace detail {

// Batch sigmoid as one vectorizable array expression; the clamp keeps the
// exponent in range so the direct form matches the scalar sigmoid() exactly.
inline Eigen::MatrixXd sigmoid_batch(const Eigen::MatrixXd& z) {
    Eigen::ArrayXXd c = z.array().min(30.0).max(-30.0);
    return (1.0 / (1.0 + (-c).exp())).matrix();
}

}  // namespace detail

/// Feed-forward network with ReLU hidden layers. Samples are matrix columns
/// throughout so that batched passes run as matrix products.
struct MlpModel {
    std::vector<std::size_t> layer_sizes;
    OutputActivation output_activation = OutputActivation::sigmoid;
    std::vector<Eigen::MatrixXd> weights;  // weights[l]: layer_sizes[l+1] x layer_sizes[l]
    std::vector<Eigen::VectorXd> biases;

    /// Glorot-uniform weights in +-sqrt(6/(fan_in+fan_out)), zero biases.
    static MlpModel init(std::vector<std::size_t> sizes, OutputActivation act, Rng& rng) {
        if (sizes.size() < 2) {
            throw std::invalid_argument("network needs an input and an output layer");
        }
        MlpModel m;
        m.layer_sizes = std::move(sizes);
        m.output_activation = act;
        for (std::size_t l = 0; l + 1 < m.layer_sizes.size(); ++l) {
            std::size_t in = m.layer_sizes[l];
            std::size_t out = m.layer_sizes[l + 1];
            double limit = std::sqrt(6.0 / static_cast<double>(in + out));
            Eigen::MatrixXd w(out, in);
            for (std::size_t r = 0; r < out; ++r) {
                for (std::size_t c = 0; c < in; ++c) {
                    w(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                        (2.0 * rng.uniform01() - 1.0) * limit;
                }
            }
            m.weights.push_back(std::move(w));
            m.biases.emplace_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(out)));
        }
        return m;
    }

    std::size_t input_size() const {
        return layer_sizes.front();
    }

    std::size_t output_size() const {
        return layer_sizes.back();
    }

    std::size_t num_layers() const {
        return weights.size();
    }

    Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& x) const {
        if (static_cast<std::size_t>(x.rows()) != input_size()) {
            throw std::invalid_argument("input size does not match network");
        }
        Eigen::MatrixXd a = x;
        for (std::size_t l = 0; l < num_layers(); ++l) {
            Eigen::MatrixXd z = (weights[l] * a).colwise() + biases[l];
            if (l + 1 < num_layers()) {
                a = z.cwiseMax(0.0);
            } else if (output_activation == OutputActivation::sigmoid) {
                a = detail::sigmoid_batch(z);
            } else {
                a = std::move(z);
            }
        }
        return a;
    }

    Eigen::VectorXd forward(const Eigen::VectorXd& x) const {
        return forward_batch(x);
    }

    bool all_finite() const {
        for (const auto& w : weights) {
            if (!w.allFinite()) {
                return false;
            }
        }
        for (const auto& b : biases) {
            if (!b.allFinite()) {
                return false;
            }
        }
        return true;
    }
};

struct Gradients {
    std::vector<Eigen::MatrixXd> dw;
    std::vector<Eigen::VectorXd> db;
    double loss = 0.0;
};

namespace detail {

inline double loss_from_output(const Eigen::MatrixXd& a, const Eigen::MatrixXd& y, Loss loss) {
    double batch = static_cast<double>(a.cols());
    if (loss == Loss::mse) {
        return (a - y).squaredNorm() / batch;
    }
    // Sigmoid outputs are clamped away from 0 and 1, so the logs are finite.
    double total = -(y.array() * a.array().log() +
                     (1.0 - y.array()) * (1.0 - a.array()).log())
                        .sum();
    return total / batch;
}

}  // namespace detail

/// Mean batch loss; per-sample losses are summed over output components.
inline double loss_value(const MlpModel& model, const Eigen::MatrixXd& x,
                         const Eigen::MatrixXd& y, Loss loss) {
    if (loss == Loss::bce && model.output_activation != OutputActivation::sigmoid) {
        throw std::invalid_argument("binary cross-entropy requires a sigmoid output layer");
    }
    return detail::loss_from_output(model.forward_batch(x), y, loss);
}

/// Exact reverse-mode gradients of the mean batch loss.
inline Gradients grad(const MlpModel& model, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                      Loss loss) {
    if (x.cols() == 0) {
        throw std::invalid_argument("batch must be nonempty");
    }
    if (static_cast<std::size_t>(x.rows()) != model.input_size() ||
        static_cast<std::size_t>(y.rows()) != model.output_size() || x.cols() != y.cols()) {
        throw std::invalid_argument("batch shapes do not match network");
    }
    if (loss == Loss::bce && model.output_activation != OutputActivation::sigmoid) {
        throw std::invalid_argument("binary cross-entropy requires a sigmoid output layer");
    }

    std::size_t layers = model.num_layers();
    std::vector<Eigen::MatrixXd> a(layers + 1);
    std::vector<Eigen::MatrixXd> z(layers);
    a[0] = x;
    for (std::size_t l = 0; l < layers; ++l) {
        z[l] = (model.weights[l] * a[l]).colwise() + model.biases[l];
        if (l + 1 < layers) {
            a[l + 1] = z[l].cwiseMax(0.0);
        } else if (model.output_activation == OutputActivation::sigmoid) {
            a[l + 1] = detail::sigmoid_batch(z[l]);
        } else {
            a[l + 1] = z[l];
        }
    }

    double batch = static_cast<double>(x.cols());
    Gradients g;
    g.dw.resize(layers);
    g.db.resize(layers);
    g.loss = detail::loss_from_output(a[layers], y, loss);

    Eigen::MatrixXd delta;
    if (loss == Loss::bce) {
        delta = (a[layers] - y) / batch;
    } else {
        delta = 2.0 * (a[layers] - y) / batch;
        if (model.output_activation == OutputActivation::sigmoid) {
            delta = delta.cwiseProduct(
                a[layers].cwiseProduct(Eigen::MatrixXd::Ones(y.rows(), y.cols()) - a[layers]));
        }
    }
    for (std::size_t l = layers; l-- > 0;) {
        g.dw[l].noalias() = delta * a[l].transpose();
        g.db[l] = delta.rowwise().sum();
        if (l > 0) {
            delta = ((model.weights[l].transpose() * delta).array() *
                     (z[l - 1].array() > 0.0).cast<double>())
                        .matrix();
        }
    }
    return g;
}

struct AdamState {
    std::vector<Eigen::MatrixXd> mw, vw;
    std::vector<Eigen::VectorXd> mb, vb;
    std::size_t step = 0;

    static AdamState for_model(const MlpModel& model) {
        AdamState s;
        for (std::size_t l = 0; l < model.num_layers(); ++l) {
            s.mw.push_back(Eigen::MatrixXd::Zero(model.weights[l].rows(), model.weights[l].cols()));
            s.vw.push_back(Eigen::MatrixXd::Zero(model.weights[l].rows(), model.weights[l].cols()));
            s.mb.push_back(Eigen::VectorXd::Zero(model.biases[l].size()));
            s.vb.push_back(Eigen::VectorXd::Zero(model.biases[l].size()));
        }
        return s;
    }
};

/// Bias-corrected Adam update.
inline void adam_step(MlpModel& model, AdamState& state, const Gradients& g,
                      const TrainConfig& cfg) {
    state.step += 1;
    double t = static_cast<double>(state.step);
    double corr1 = 1.0 - std::pow(cfg.adam_beta1, t);
    double corr2 = 1.0 - std::pow(cfg.adam_beta2, t);
    for (std::size_t l = 0; l < model.num_layers(); ++l) {
        state.mw[l] = cfg.adam_beta1 * state.mw[l] + (1.0 - cfg.adam_beta1) * g.dw[l];
        state.vw[l] = cfg.adam_beta2 * state.vw[l] + (1.0 - cfg.adam_beta2) * g.dw[l].cwiseAbs2();
        state.mb[l] = cfg.adam_beta1 * state.mb[l] + (1.0 - cfg.adam_beta1) * g.db[l];
        state.vb[l] = cfg.adam_beta2 * state.vb[l] + (1.0 - cfg.adam_beta2) * g.db[l].cwiseAbs2();
        model.weights[l] -=
            (cfg.learning_rate * (state.mw[l] / corr1).array() /
             ((state.vw[l] / corr2).array().sqrt() + cfg.adam_epsilon))
                .matrix();
        model.biases[l] -=
            (cfg.learning_rate * (state.mb[l] / corr1).array() /
             ((state.vb[l] / corr2).array().sqrt() + cfg.adam_epsilon))
                .matrix();
    }
}

struct TrainResult {
    std::vector<double> epoch_losses;
};

/// Seeded mini-batch training. The shuffle, init and update order are fully
/// determined by (seed, data, config); reductions are sequential.
inline TrainResult train(MlpModel& model, const Eigen::MatrixXd& inputs,
                         const Eigen::MatrixXd& targets, Loss loss, const TrainConfig& cfg) {
    if (inputs.cols() == 0) {
        throw std::invalid_argument("dataset must be nonempty");
    }
    if (inputs.cols() != targets.cols()) {
        throw std::invalid_argument("inputs and targets disagree on sample count");
    }
    if (cfg.batch_size < 1 || cfg.epochs < 1 || cfg.learning_rate < 0.0) {
        throw std::invalid_argument("invalid training configuration");
    }

    std::size_t n = static_cast<std::size_t>(inputs.cols());
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) {
        order[i] = i;
    }
    Rng shuffle_rng = Rng(cfg.seed).derive(0x5u);
    AdamState state = AdamState::for_model(model);
    TrainResult result;
    result.epoch_losses.reserve(cfg.epochs);

    Eigen::MatrixXd xb, yb;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = n; i-- > 1;) {
            std::size_t j = shuffle_rng.uniform_int(i + 1);
            std::swap(order[i], order[j]);
        }
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            std::size_t bs = std::min(cfg.batch_size, n - start);
            xb.resize(inputs.rows(), static_cast<Eigen::Index>(bs));
            yb.resize(targets.rows(), static_cast<Eigen::Index>(bs));
            for (std::size_t i = 0; i < bs; ++i) {
                xb.col(static_cast<Eigen::Index>(i)) =
                    inputs.col(static_cast<Eigen::Index>(order[start + i]));
                yb.col(static_cast<Eigen::Index>(i)) =
                    targets.col(static_cast<Eigen::Index>(order[start + i]));
            }
            Gradients g = grad(model, xb, yb, loss);
            adam_step(model, state, g, cfg);
            loss_sum += g.loss * static_cast<double>(bs);
        }
        if (!model.all_finite()) {
            throw std::runtime_error("training diverged: non-finite parameters at epoch " +
                                     std::to_string(epoch + 1));
        }
        result.epoch_losses.push_back(loss_sum / static_cast<double>(n));
    }
    return result;
}

inline nlohmann::json model_to_json(const MlpModel& model) {
    nlohmann::json j;
    j["version"] = 1;
    j["layer_sizes"] = model.layer_sizes;
    j["output_activation"] =
        model.output_activation == OutputActivation::sigmoid ? "sigmoid" : "linear";
    nlohmann::json weights = nlohmann::json::array();
    for (const auto& w : model.weights) {
        nlohmann::json rows = nlohmann::json::array();
        for (Eigen::Index r = 0; r < w.rows(); ++r) {
            nlohmann::json row = nlohmann::json::array();
            for (Eigen::Index c = 0; c < w.cols(); ++c) {
                row.push_back(w(r, c));
            }
            rows.push_back(std::move(row));
        }
        weights.push_back(std::move(rows));
    }
    j["weights"] = std::move(weights);
    nlohmann::json biases = nlohmann::json::array();
    for (const auto& b : model.biases) {
        nlohmann::json vec = nlohmann::json::array();
        for (Eigen::Index r = 0; r < b.size(); ++r) {
            vec.push_back(b(r));
        }
        biases.push_back(std::move(vec));
    }
    j["biases"] = std::move(biases);
    return j;
}

inline MlpModel model_from_json(const nlohmann::json& j) {
    if (!j.contains("version")) {
        throw std::runtime_error("model file has no version field");
    }
    int version = j.at("version").get<int>();
    if (version != 1) {
        throw std::runtime_error("unsupported model version: found " + std::to_string(version) +
                                 ", expected 1");
    }
    MlpModel m;
    m.layer_sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
    std::string act = j.at("output_activation").get<std::string>();
    if (act == "sigmoid") {
        m.output_activation = OutputActivation::sigmoid;
    } else if (act == "linear") {
        m.output_activation = OutputActivation::linear;
    } else {
        throw std::runtime_error("unknown output activation: " + act);
    }
    if (m.layer_sizes.size() < 2) {
        throw std::runtime_error("model file has fewer than two layers");
    }
    const auto& weights = j.at("weights");
    const auto& biases = j.at("biases");
    if (weights.size() != m.layer_sizes.size() - 1 || biases.size() != weights.size()) {
        throw std::runtime_error("model file parameter count does not match layer sizes");
    }
    for (std::size_t l = 0; l + 1 < m.layer_sizes.size(); ++l) {
        std::size_t out = m.layer_sizes[l + 1];
        std::size_t in = m.layer_sizes[l];
        const auto& wj = weights.at(l);
        if (wj.size() != out) {
            throw std::runtime_error("model file weight shape mismatch");
        }
        Eigen::MatrixXd w(out, in);
        for (std::size_t r = 0; r < out; ++r) {
            const auto& row = wj.at(r);
            if (row.size() != in) {
                throw std::runtime_error("model file weight shape mismatch");
            }
            for (std::size_t c = 0; c < in; ++c) {
                w(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                    row.at(c).get<double>();
            }
        }
        const auto& bj = biases.at(l);
        if (bj.size() != out) {
            throw std::runtime_error("model file bias shape mismatch");
        }
        Eigen::VectorXd b(out);
        for (std::size_t r = 0; r < out; ++r) {
            b(static_cast<Eigen::Index>(r)) = bj.at(r).get<double>();
        }
        m.weights.push_back(std::move(w));
        m.biases.push_back(std::move(b));
    }
    if (!m.all_finite()) {
        throw std::runtime_error("model file contains non-finite parameters");
    }
    return m;
}

inline void save_model(const std::string& path, const MlpModel& model) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot open for writing: " + path);
    }
    out << model_to_json(model).dump() << '\n';
    if (!out) {
        throw std::runtime_error("write failed: " + path);
    }
}

inline MlpModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open: " + path);
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("model file is not valid JSON: " + std::string(e.what()));
    }
    return model_from_json(j);
}

}  // namespace qeclab
