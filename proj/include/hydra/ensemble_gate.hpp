#pragma once

#include <Eigen/Dense>

#include <array>
#include <string>
#include <vector>

#include "hydra/core_data.hpp"

namespace hydra {

inline constexpr std::size_t kExperts = 3;
inline constexpr std::array<ModelId, kExperts> kExpertIds = {ModelId::GossGbdt, ModelId::OrderedGbdt,
                                                             ModelId::DenseLight};

struct GateState {
    Eigen::VectorXd priors;   // beta_m >= 0
    Eigen::VectorXd losses;   // l_m(t), +inf when unavailable
    Eigen::VectorXd weights;  // alpha_m(t)
    double temperature = 2.0;  // tau
    double gamma = 0.1;
    bool uniform = false;  // static equal weights, ignoring losses
    int epoch = 0;
    std::vector<std::string> events;

    static GateState initial(Eigen::Index models, double prior = 1.0, double temperature = 2.0, double gamma = 0.1,
                             bool uniform = false);
};

/// alpha_m = (beta_m + exp(-l_m)) / sum_j (beta_j + exp(-l_j)). A non-finite
/// loss contributes exp(-l) = 0 and is recorded in `events`.
Eigen::VectorXd gate_weights(const Eigen::Ref<const Eigen::VectorXd>& priors, const Eigen::Ref<const Eigen::VectorXd>& losses,
                             std::vector<std::string>* events = nullptr);

GateState update_weights(GateState state, const Eigen::Ref<const Eigen::VectorXd>& losses);

/// p*_i = sum_m alpha_m p_i^(m); `predictions` is N x M.
Eigen::VectorXd blend(const Eigen::Ref<const Eigen::MatrixXd>& predictions, const Eigen::Ref<const Eigen::VectorXd>& weights);

/// Index of the smallest loss, ties to the lowest index; non-finite losses
/// never win unless all are non-finite.
Eigen::Index best_expert(const Eigen::Ref<const Eigen::VectorXd>& losses);

/// sigmoid(logit(p) / tau) per row, p clipped first.
Eigen::VectorXd temperature_target(const Eigen::Ref<const Eigen::VectorXd>& best, double temperature);

/// gamma * mean_i KL(p*_i || p_target_i), both clipped.
double consistency_penalty(const Eigen::Ref<const Eigen::VectorXd>& p_star, const Eigen::Ref<const Eigen::VectorXd>& p_target,
                           double gamma);

/// sum_m L_m + consistency_penalty(p*, p_target, gamma).
double total_objective(const Eigen::Ref<const Eigen::VectorXd>& model_losses, const Eigen::Ref<const Eigen::VectorXd>& p_star,
                       const Eigen::Ref<const Eigen::VectorXd>& p_target, double gamma);

struct GateTrajectoryRow {
    int epoch = 0;
    int week = 0;
    std::vector<double> losses;
    std::vector<double> weights;
};

/// epoch,week,loss_<model>...,alpha_<model>...
std::string gate_trajectory_csv(const std::vector<GateTrajectoryRow>& rows);

}  // namespace hydra
