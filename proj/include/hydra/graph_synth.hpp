#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hydra/core_data.hpp"

namespace hydra {

/// Nodes are frame rows. `neighbors[i]` is sorted ascending and always
/// contains i itself.
struct ClientGraph {
    Eigen::MatrixXd features;  // N x F
    std::vector<std::vector<Eigen::Index>> neighbors;
    int max_neighbors = 32;  // K_max, excluding the self-loop
    std::vector<std::string> key_columns;

    Eigen::Index nodes() const { return features.rows(); }
    int max_degree() const;
};

struct GraphOptions {
    std::vector<std::string> key_columns;  // empty: the schema's key columns
    int max_neighbors = 32;
    std::uint64_t seed = 0;
    /// Only link j into N(i) when week_j <= week_i.
    bool causal = false;
};

/// Edge (i, j) when i != j share a non-missing, known code in any key column.
/// Nodes with more than K_max candidates keep the K_max with the smallest
/// mix64(seed, j), ties by j.
ClientGraph build_graph(const FeatureFrame& frame, Eigen::MatrixXd node_features, const GraphOptions& options);

/// Graph restricted to `nodes` (renumbered in the given order); neighbors
/// outside the set are dropped.
ClientGraph induced_subgraph(const ClientGraph& graph, std::span<const Eigen::Index> nodes);

struct GatConfig {
    int heads = 4;       // H
    int hidden = 16;     // F1, per head
    int embedding = 8;   // F2
    double leaky_slope = 0.2;
    int epochs = 100;
    double learning_rate = 0.05;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Two attention layers and a logistic head. Layer 1 concatenates its heads,
/// layer 2 averages them; sigma is ELU in both layers.
struct GatModel {
    int heads = 0;
    int hidden = 0;
    int embedding = 0;
    double leaky_slope = 0.2;
    Eigen::MatrixXd w0;      // F x H*F1
    Eigen::MatrixXd a0_src;  // H x F1
    Eigen::MatrixXd a0_dst;  // H x F1
    Eigen::MatrixXd w1;      // H*F1 x H*F2
    Eigen::MatrixXd a1_src;  // H x F2
    Eigen::MatrixXd a1_dst;  // H x F2
    Eigen::VectorXd head_w;  // F2
    double head_b = 0.0;

    static GatModel initialize(Eigen::Index input_dim, const GatConfig& config);

    Eigen::Index input_dim() const { return w0.rows(); }
    Eigen::Index parameter_count() const;
    Eigen::VectorXd flatten() const;
    void unflatten(const Eigen::Ref<const Eigen::VectorXd>& params);
};

/// Attention coefficients are stored per edge in CSR order: the edges of node
/// i occupy rows offsets[i] .. offsets[i+1]-1, matching graph.neighbors[i].
struct GatForward {
    std::vector<Eigen::Index> offsets;
    Eigen::MatrixXd alpha0;  // E x H
    Eigen::MatrixXd alpha1;  // E x H
    Eigen::MatrixXd h1;      // N x H*F1
    Eigen::MatrixXd h2;      // N x F2
    Eigen::VectorXd logits;
};

GatForward gat_forward(const GatModel& model, const ClientGraph& graph);

struct GatGradient {
    double loss = 0.0;
    Eigen::VectorXd gradient;  // same layout as GatModel::flatten()
};

/// Mean binary cross-entropy of the logistic head over nodes with mask set.
GatGradient gat_loss_gradient(const GatModel& model, const ClientGraph& graph, const Eigen::VectorXi& labels,
                              const std::vector<bool>& mask);
double gat_loss(const GatModel& model, const ClientGraph& graph, const Eigen::VectorXi& labels,
                const std::vector<bool>& mask);

struct GatTrainLog {
    std::vector<double> train_loss;
    std::vector<double> validation_loss;
    int best_epoch = -1;
};

/// Full-batch gradient descent; returns the parameters at the best validation
/// loss (training loss when the validation mask is empty). Throws
/// TrainingError on a non-finite loss.
GatModel gat_train(const ClientGraph& graph, const Eigen::VectorXi& labels, const std::vector<bool>& train_mask,
                   const std::vector<bool>& validation_mask, const GatConfig& config, GatTrainLog* log = nullptr);

/// z_i = h_i^(2).
Eigen::MatrixXd embed(const GatModel& model, const ClientGraph& graph);

std::vector<std::string> embedding_feature_names(const GatModel& model);

}  // namespace hydra
