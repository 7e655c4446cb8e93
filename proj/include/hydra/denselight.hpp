#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hydra/core_data.hpp"

namespace hydra {

/// GELU in its exact erf form.
template <typename Scalar>
Scalar gelu(Scalar x) {
    return Scalar(0.5) * x * (Scalar(1) + std::erf(x / std::sqrt(Scalar(2))));
}

template <typename Scalar>
Scalar gelu_grad(Scalar x) {
    const Scalar pdf = std::exp(-x * x / Scalar(2)) / std::sqrt(Scalar(2) * Scalar(M_PI));
    return Scalar(0.5) * (Scalar(1) + std::erf(x / std::sqrt(Scalar(2)))) + x * pdf;
}

inline constexpr double kLayerNormEpsilon = 1e-5;

struct DenseLightConfig {
    int width = 64;      // d
    int blocks = 3;      // L
    int gap_groups = 4;  // d_gap; must divide d
    double smoothing = 0.1;
    double learning_rate = 1e-3;
    double momentum = 0.0;
    int batch_size = 256;
    int max_epochs = 50;
    int patience = 5;
    double fine_tune_factor = 0.1;
    int fine_tune_epochs = 20;
    std::uint64_t seed = 0;

    void validate() const;
};

/// h <- h + s * GELU(W_f LN(h)), s = sigmoid(W_s GAP(h) + b_s), where GAP
/// averages h over d_gap contiguous groups.
struct DenseBlock {
    Eigen::VectorXd ln_gamma;  // d
    Eigen::VectorXd ln_beta;   // d
    Eigen::MatrixXd wf;        // d x d
    Eigen::MatrixXd ws;        // d x d_gap
    Eigen::VectorXd bs;        // d
};

struct DenseLightModel {
    Eigen::MatrixXd w_in;  // d x F
    Eigen::VectorXd b_in;  // d
    std::vector<DenseBlock> blocks;
    Eigen::VectorXd w_out;  // d
    double b_out = 0.0;
    int gap_groups = 4;
    double smoothing = 0.1;

    static DenseLightModel initialize(Eigen::Index input_dim, const DenseLightConfig& config);

    Eigen::Index input_dim() const { return w_in.cols(); }
    Eigen::Index width() const { return w_in.rows(); }
    Eigen::Index parameter_count() const;
    Eigen::VectorXd flatten() const;
    void unflatten(const Eigen::Ref<const Eigen::VectorXd>& params);

    std::string serialize() const;
    static DenseLightModel deserialize(const std::string& text);
};

struct DenseForward {
    Eigen::VectorXd logits;
    Eigen::VectorXd probabilities;
    std::vector<Eigen::MatrixXd> gates;  // per block, N x d
};

DenseForward dense_forward(const DenseLightModel& model, const Eigen::MatrixXd& inputs);
Eigen::VectorXd dense_predict(const DenseLightModel& model, const Eigen::MatrixXd& inputs);

/// Mean of -[ybar log p + (1 - ybar) log(1 - p)], ybar = (1 - eps) y + eps / 2,
/// with p clipped to [1e-15, 1 - 1e-15].
double smoothed_loss(const Eigen::Ref<const Eigen::VectorXi>& labels, const Eigen::Ref<const Eigen::VectorXd>& probs,
                     double epsilon = 0.1);

/// Binary KL(p_star || p_target) per row, both clipped.
double binary_kl(double p_star, double p_target);

/// Consistency regularizer for fine-tuning: p_star = other + alpha * p, and
/// the objective gains gamma * mean KL(p_star || target).
struct ConsistencyTerm {
    Eigen::VectorXd other;   // blended contribution of the remaining models
    double alpha = 0.0;      // this model's gate weight
    Eigen::VectorXd target;  // p_target
    double gamma = 0.0;
};

struct DenseGradient {
    double loss = 0.0;
    Eigen::VectorXd gradient;  // same layout as DenseLightModel::flatten()
};

/// Smoothed loss (plus the consistency term when given) and its gradient.
DenseGradient dense_loss_gradient(const DenseLightModel& model, const Eigen::MatrixXd& inputs,
                                  const Eigen::VectorXi& labels, const ConsistencyTerm* consistency = nullptr);
double dense_objective(const DenseLightModel& model, const Eigen::MatrixXd& inputs, const Eigen::VectorXi& labels,
                       const ConsistencyTerm* consistency = nullptr);

struct DenseTrainLog {
    std::vector<double> train_loss;       // entry 0 is before any update
    std::vector<double> validation_loss;  // entry 0 is before any update
    int best_epoch = 0;
    int stop_epoch = 0;
};

struct DenseBatch {
    const Eigen::MatrixXd& inputs;
    const Eigen::VectorXi& labels;
};

/// Mini-batch gradient descent with early stopping on the validation
/// smoothed loss; returns the best-epoch weights. Throws TrainingError on a
/// non-finite loss.
DenseLightModel dense_train(DenseLightModel model, const DenseBatch& train, const DenseBatch& validation,
                            const DenseLightConfig& config, int max_epochs, double learning_rate,
                            DenseTrainLog* log = nullptr, const ConsistencyTerm* consistency = nullptr);

/// dense_train at learning_rate * fine_tune_factor for at most `epochs`.
DenseLightModel dense_fine_tune(DenseLightModel model, const DenseBatch& train, const DenseBatch& validation,
                                const DenseLightConfig& config, int epochs, DenseTrainLog* log = nullptr,
                                const ConsistencyTerm* consistency = nullptr);

}  // namespace hydra
