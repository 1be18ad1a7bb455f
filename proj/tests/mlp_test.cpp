#include "qeclab/mlp.hpp"

#include <cmath>
#include <cstdio>

#include <gtest/gtest.h>

#include "qeclab/rng.hpp"

using namespace qeclab;

namespace {

MlpModel small_random_model(OutputActivation act, uint64_t seed,
                            std::vector<std::size_t> sizes = {3, 5, 4, 2}) {
    Rng rng(seed);
    return MlpModel::init(std::move(sizes), act, rng);
}

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 1.0) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
        for (Eigen::Index r = 0; r < rows; ++r) {
            m(r, c) = scale * (2.0 * rng.uniform01() - 1.0);
        }
    }
    return m;
}

Eigen::MatrixXd random_binary_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
        for (Eigen::Index r = 0; r < rows; ++r) {
            m(r, c) = static_cast<double>(rng.uniform_int(2));
        }
    }
    return m;
}

TEST(Forward, ZeroParametersSigmoidGivesHalf) {
    MlpModel m = small_random_model(OutputActivation::sigmoid, 1);
    for (auto& w : m.weights) {
        w.setZero();
    }
    Eigen::VectorXd y = m.forward(Eigen::VectorXd::Ones(3));
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        EXPECT_DOUBLE_EQ(y(i), 0.5);
    }
}

TEST(Forward, SingleLinearIdentityLayer) {
    Rng rng(2);
    MlpModel m = MlpModel::init({4, 4}, OutputActivation::linear, rng);
    m.weights[0] = Eigen::MatrixXd::Identity(4, 4);
    m.biases[0].setZero();
    Eigen::VectorXd x(4);
    x << 0.3, -1.2, 4.5, 0.0;
    EXPECT_EQ(m.forward(x), x);
}

TEST(Forward, MatchesStraightLineArithmeticOracle) {
    // Two-layer network recomputed with explicit loops.
    MlpModel m = small_random_model(OutputActivation::sigmoid, 7, {3, 4, 2});
    Eigen::VectorXd x(3);
    x << 0.25, -0.5, 1.5;
    std::vector<double> hidden(4);
    for (int r = 0; r < 4; ++r) {
        double z = m.biases[0](r);
        for (int c = 0; c < 3; ++c) {
            z += m.weights[0](r, c) * x(c);
        }
        hidden[static_cast<std::size_t>(r)] = z > 0.0 ? z : 0.0;
    }
    for (int r = 0; r < 2; ++r) {
        double z = m.biases[1](r);
        for (int c = 0; c < 4; ++c) {
            z += m.weights[1](r, c) * hidden[static_cast<std::size_t>(c)];
        }
        double expected = 1.0 / (1.0 + std::exp(-z));
        EXPECT_NEAR(m.forward(x)(r), expected, 1e-10);
    }
}

TEST(Forward, RejectsWrongInputSize) {
    MlpModel m = small_random_model(OutputActivation::linear, 3);
    EXPECT_THROW(m.forward(Eigen::VectorXd::Zero(5)), std::invalid_argument);
}

TEST(Forward, SigmoidOutputsStayInsideOpenUnitInterval) {
    MlpModel m = small_random_model(OutputActivation::sigmoid, 11);
    // Force extreme logits through huge weights.
    m.weights.back() *= 1e6;
    Eigen::VectorXd y = m.forward(Eigen::VectorXd::Ones(3) * 50.0);
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        EXPECT_GT(y(i), 0.0);
        EXPECT_LT(y(i), 1.0);
    }
}

// Central finite differences over every parameter of a random model.
void check_gradients(OutputActivation act, Loss loss, uint64_t seed) {
    MlpModel m = small_random_model(act, seed);
    Rng rng(seed + 1);
    Eigen::MatrixXd x = random_matrix(3, 6, rng);
    Eigen::MatrixXd y = loss == Loss::bce ? random_binary_matrix(2, 6, rng)
                                          : random_matrix(2, 6, rng);
    Gradients g = grad(m, x, y, loss);
    const double h = 1e-5;
    auto check = [&](double* param, double analytic) {
        double original = *param;
        *param = original + h;
        double plus = loss_value(m, x, y, loss);
        *param = original - h;
        double minus = loss_value(m, x, y, loss);
        *param = original;
        double numeric = (plus - minus) / (2.0 * h);
        double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
        EXPECT_LT(std::abs(analytic - numeric) / denom, 1e-4)
            << "analytic " << analytic << " numeric " << numeric;
    };
    for (std::size_t l = 0; l < m.num_layers(); ++l) {
        for (Eigen::Index r = 0; r < m.weights[l].rows(); ++r) {
            for (Eigen::Index c = 0; c < m.weights[l].cols(); ++c) {
                check(&m.weights[l](r, c), g.dw[l](r, c));
            }
        }
        for (Eigen::Index r = 0; r < m.biases[l].size(); ++r) {
            check(&m.biases[l](r), g.db[l](r));
        }
    }
}

TEST(Grad, MatchesFiniteDifferencesMseLinear) {
    check_gradients(OutputActivation::linear, Loss::mse, 101);
}

TEST(Grad, MatchesFiniteDifferencesMseSigmoid) {
    check_gradients(OutputActivation::sigmoid, Loss::mse, 202);
}

TEST(Grad, MatchesFiniteDifferencesBce) {
    check_gradients(OutputActivation::sigmoid, Loss::bce, 303);
}

TEST(Grad, ZeroEverythingGivesZeroGradientsUnderLinearMse) {
    MlpModel m = small_random_model(OutputActivation::linear, 5, {2, 3, 2});
    for (auto& w : m.weights) {
        w.setZero();
    }
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(2, 4);
    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(2, 4);
    Gradients g = grad(m, x, y, Loss::mse);
    for (std::size_t l = 0; l < m.num_layers(); ++l) {
        EXPECT_EQ(g.dw[l].cwiseAbs().maxCoeff(), 0.0);
        EXPECT_EQ(g.db[l].cwiseAbs().maxCoeff(), 0.0);
    }
    EXPECT_EQ(g.loss, 0.0);
}

TEST(Grad, MseGradientsScaleLinearlyWithResidual) {
    MlpModel m = small_random_model(OutputActivation::linear, 9);
    Rng rng(10);
    Eigen::MatrixXd x = random_matrix(3, 5, rng);
    Eigen::MatrixXd base = m.forward_batch(x);
    Eigen::MatrixXd residual = random_matrix(2, 5, rng);
    Gradients g1 = grad(m, x, base - residual, Loss::mse);
    Gradients g2 = grad(m, x, base - 2.0 * residual, Loss::mse);
    for (std::size_t l = 0; l < m.num_layers(); ++l) {
        EXPECT_LT((g2.dw[l] - 2.0 * g1.dw[l]).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LT((g2.db[l] - 2.0 * g1.db[l]).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Grad, RejectsEmptyBatchAndBadShapes) {
    MlpModel m = small_random_model(OutputActivation::linear, 6);
    EXPECT_THROW(grad(m, Eigen::MatrixXd(3, 0), Eigen::MatrixXd(2, 0), Loss::mse),
                 std::invalid_argument);
    EXPECT_THROW(grad(m, Eigen::MatrixXd::Zero(3, 2), Eigen::MatrixXd::Zero(4, 2), Loss::mse),
                 std::invalid_argument);
    EXPECT_THROW(loss_value(m, Eigen::MatrixXd::Zero(3, 2), Eigen::MatrixXd::Zero(2, 2),
                            Loss::bce),
                 std::invalid_argument);
}

TEST(Adam, ZeroGradientsLeaveParametersUnchanged) {
    MlpModel m = small_random_model(OutputActivation::linear, 13);
    MlpModel before = m;
    AdamState state = AdamState::for_model(m);
    Gradients g;
    for (std::size_t l = 0; l < m.num_layers(); ++l) {
        g.dw.push_back(Eigen::MatrixXd::Zero(m.weights[l].rows(), m.weights[l].cols()));
        g.db.push_back(Eigen::VectorXd::Zero(m.biases[l].size()));
    }
    TrainConfig cfg;
    for (int i = 0; i < 10; ++i) {
        adam_step(m, state, g, cfg);
    }
    for (std::size_t l = 0; l < m.num_layers(); ++l) {
        EXPECT_EQ(m.weights[l], before.weights[l]);
        EXPECT_EQ(m.biases[l], before.biases[l]);
    }
}

TEST(Adam, ConstantGradientStepApproachesLearningRate) {
    // With a constant gradient the bias-corrected update tends to
    // lr * sign(g) as the moment estimates settle.
    MlpModel m = small_random_model(OutputActivation::linear, 17, {1, 1});
    AdamState state = AdamState::for_model(m);
    TrainConfig cfg;
    cfg.learning_rate = 0.01;
    Gradients g;
    g.dw.push_back(Eigen::MatrixXd::Constant(1, 1, 3.7));
    g.db.push_back(Eigen::VectorXd::Constant(1, -0.4));
    double prev_w = m.weights[0](0, 0);
    double prev_b = m.biases[0](0);
    double step_w = 0.0;
    double step_b = 0.0;
    for (int i = 0; i < 5000; ++i) {
        adam_step(m, state, g, cfg);
        step_w = m.weights[0](0, 0) - prev_w;
        step_b = m.biases[0](0) - prev_b;
        prev_w = m.weights[0](0, 0);
        prev_b = m.biases[0](0);
    }
    EXPECT_NEAR(step_w, -cfg.learning_rate, 1e-6);  // gradient positive
    EXPECT_NEAR(step_b, cfg.learning_rate, 1e-6);   // gradient negative
}

TEST(Train, DeterministicAcrossRuns) {
    Rng data_rng(23);
    Eigen::MatrixXd x = random_matrix(3, 40, data_rng);
    Eigen::MatrixXd y = random_matrix(2, 40, data_rng);
    TrainConfig cfg;
    cfg.batch_size = 8;
    cfg.epochs = 20;
    cfg.learning_rate = 0.005;
    cfg.seed = 99;
    MlpModel a = small_random_model(OutputActivation::linear, 31);
    MlpModel b = a;
    TrainResult ra = train(a, x, y, Loss::mse, cfg);
    TrainResult rb = train(b, x, y, Loss::mse, cfg);
    for (std::size_t l = 0; l < a.num_layers(); ++l) {
        EXPECT_EQ(a.weights[l], b.weights[l]);
        EXPECT_EQ(a.biases[l], b.biases[l]);
    }
    EXPECT_EQ(ra.epoch_losses, rb.epoch_losses);
}

TEST(Train, LearnsXor) {
    Eigen::MatrixXd x(2, 4);
    x << 0, 0, 1, 1,
         0, 1, 0, 1;
    Eigen::MatrixXd y(1, 4);
    y << 0, 1, 1, 0;
    Rng rng(41);
    MlpModel m = MlpModel::init({2, 16, 1}, OutputActivation::sigmoid, rng);
    TrainConfig cfg;
    cfg.batch_size = 4;
    cfg.epochs = 2000;
    cfg.learning_rate = 0.01;
    cfg.seed = 5;
    train(m, x, y, Loss::mse, cfg);
    EXPECT_LT(loss_value(m, x, y, Loss::mse), 0.05);
}

TEST(Train, ZeroLearningRateIsFlat) {
    Rng data_rng(47);
    Eigen::MatrixXd x = random_matrix(3, 16, data_rng);
    Eigen::MatrixXd y = random_matrix(2, 16, data_rng);
    MlpModel m = small_random_model(OutputActivation::linear, 53);
    MlpModel before = m;
    TrainConfig cfg;
    cfg.batch_size = 4;
    cfg.epochs = 10;
    cfg.learning_rate = 0.0;
    TrainResult r = train(m, x, y, Loss::mse, cfg);
    for (std::size_t l = 0; l < m.num_layers(); ++l) {
        EXPECT_EQ(m.weights[l], before.weights[l]);
    }
    for (double loss : r.epoch_losses) {
        EXPECT_DOUBLE_EQ(loss, r.epoch_losses.front());
    }
}

TEST(Train, LossHistoryLengthEqualsEpochs) {
    Rng data_rng(59);
    Eigen::MatrixXd x = random_matrix(3, 10, data_rng);
    Eigen::MatrixXd y = random_matrix(2, 10, data_rng);
    MlpModel m = small_random_model(OutputActivation::linear, 61);
    TrainConfig cfg;
    cfg.batch_size = 3;
    cfg.epochs = 7;
    cfg.learning_rate = 0.001;
    EXPECT_EQ(train(m, x, y, Loss::mse, cfg).epoch_losses.size(), 7u);
}

TEST(Checkpoint, ExactRoundTrip) {
    MlpModel m = small_random_model(OutputActivation::sigmoid, 67);
    std::string path = testing::TempDir() + "qeclab_model_roundtrip.json";
    save_model(path, m);
    MlpModel loaded = load_model(path);
    EXPECT_EQ(loaded.layer_sizes, m.layer_sizes);
    EXPECT_EQ(loaded.output_activation, m.output_activation);
    Rng rng(2);
    Eigen::VectorXd x(3);
    x << 0.1, -0.7, 0.3;
    Eigen::VectorXd ya = m.forward(x);
    Eigen::VectorXd yb = loaded.forward(x);
    for (Eigen::Index i = 0; i < ya.size(); ++i) {
        EXPECT_EQ(ya(i), yb(i));  // bit-identical outputs after reload
    }
    std::remove(path.c_str());
}

TEST(Checkpoint, TruncatedFileIsRejected) {
    MlpModel m = small_random_model(OutputActivation::sigmoid, 71);
    std::string path = testing::TempDir() + "qeclab_model_truncated.json";
    save_model(path, m);
    std::string full;
    {
        std::ifstream in(path);
        std::getline(in, full);
    }
    {
        std::ofstream out(path);
        out << full.substr(0, full.size() / 2);
    }
    EXPECT_THROW(load_model(path), std::runtime_error);
    std::remove(path.c_str());
}

TEST(Checkpoint, VersionMismatchNamesBothVersions) {
    MlpModel m = small_random_model(OutputActivation::sigmoid, 73);
    nlohmann::json j = model_to_json(m);
    j["version"] = 9;
    try {
        model_from_json(j);
        FAIL() << "expected version rejection";
    } catch (const std::runtime_error& e) {
        std::string what = e.what();
        EXPECT_NE(what.find("9"), std::string::npos);
        EXPECT_NE(what.find("1"), std::string::npos);
    }
}

}  // namespace
