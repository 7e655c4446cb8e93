#include "hydra/ensemble_gate.hpp"

#include <cmath>
#include <sstream>

#include "hydra/denselight.hpp"
#include "hydra/format.hpp"

namespace hydra {

GateState GateState::initial(Eigen::Index models, double prior, double temperature, double gamma, bool uniform) {
    if (models < 1) throw ConfigError("gate needs at least one model");
    if (!(prior >= 0.0)) throw ConfigError("gate priors must be non-negative");
    if (!(temperature > 0.0)) throw ConfigError("gate.temperature must be positive");
    if (!(gamma >= 0.0)) throw ConfigError("gate.gamma must be non-negative");
    GateState s;
    s.priors = Eigen::VectorXd::Constant(models, prior);
    s.losses = Eigen::VectorXd::Constant(models, INFINITY);
    s.weights = Eigen::VectorXd::Constant(models, 1.0 / static_cast<double>(models));
    s.temperature = temperature;
    s.gamma = gamma;
    s.uniform = uniform;
    return s;
}

Eigen::VectorXd gate_weights(const Eigen::Ref<const Eigen::VectorXd>& priors, const Eigen::Ref<const Eigen::VectorXd>& losses,
                             std::vector<std::string>* events) {
    if (priors.size() != losses.size()) throw ShapeError("gate: priors and losses differ in length");
    Eigen::VectorXd score(priors.size());
    for (Eigen::Index m = 0; m < priors.size(); ++m) {
        if (!(priors(m) >= 0.0) || !std::isfinite(priors(m))) throw ConfigError("gate priors must be finite and non-negative");
        double e = 0.0;
        if (std::isfinite(losses(m))) {
            e = std::exp(-losses(m));
        } else if (events) {
            events->push_back("model " + std::to_string(m) + " loss " + format_double(losses(m)) + " treated as exp(-l) = 0");
        }
        score(m) = priors(m) + e;
    }
    const double total = score.sum();
    if (!(total > 0.0)) throw MetricError("gate weights undefined: every prior is zero and every loss non-finite");
    return score / total;
}

GateState update_weights(GateState state, const Eigen::Ref<const Eigen::VectorXd>& losses) {
    state.losses = losses;
    ++state.epoch;
    if (state.uniform) {
        state.weights = Eigen::VectorXd::Constant(losses.size(), 1.0 / static_cast<double>(losses.size()));
    } else {
        state.weights = gate_weights(state.priors, losses, &state.events);
    }
    return state;
}

Eigen::VectorXd blend(const Eigen::Ref<const Eigen::MatrixXd>& predictions, const Eigen::Ref<const Eigen::VectorXd>& weights) {
    if (predictions.cols() != weights.size()) throw ShapeError("blend: one weight per model column required");
    return predictions * weights;
}

Eigen::Index best_expert(const Eigen::Ref<const Eigen::VectorXd>& losses) {
    Eigen::Index best = 0;
    for (Eigen::Index m = 1; m < losses.size(); ++m) {
        const bool finite_m = std::isfinite(losses(m)), finite_b = std::isfinite(losses(best));
        if ((finite_m && !finite_b) || (finite_m && losses(m) < losses(best))) best = m;
    }
    return best;
}

Eigen::VectorXd temperature_target(const Eigen::Ref<const Eigen::VectorXd>& best, double temperature) {
    if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
    return best.unaryExpr([temperature](double p) {
        const double q = std::clamp(p, kProbabilityClip, 1.0 - kProbabilityClip);
        return sigmoid(logit(q) / temperature);
    });
}

double consistency_penalty(const Eigen::Ref<const Eigen::VectorXd>& p_star, const Eigen::Ref<const Eigen::VectorXd>& p_target,
                           double gamma) {
    if (p_star.size() != p_target.size()) throw ShapeError("consistency penalty: vectors differ in length");
    if (p_star.size() == 0) return 0.0;
    double total = 0.0;
    for (Eigen::Index i = 0; i < p_star.size(); ++i) total += binary_kl(p_star(i), p_target(i));
    return gamma * total / static_cast<double>(p_star.size());
}

double total_objective(const Eigen::Ref<const Eigen::VectorXd>& model_losses, const Eigen::Ref<const Eigen::VectorXd>& p_star,
                       const Eigen::Ref<const Eigen::VectorXd>& p_target, double gamma) {
    return model_losses.sum() + consistency_penalty(p_star, p_target, gamma);
}

std::string gate_trajectory_csv(const std::vector<GateTrajectoryRow>& rows) {
    std::ostringstream out;
    out << "epoch,week";
    for (auto id : kExpertIds) out << ",loss_" << to_string(id);
    for (auto id : kExpertIds) out << ",alpha_" << to_string(id);
    out << '\n';
    for (const auto& r : rows) {
        out << r.epoch << ',' << r.week;
        for (double v : r.losses) out << ',' << format_double(v);
        for (double v : r.weights) out << ',' << format_double(v);
        out << '\n';
    }
    return out.str();
}

}  // namespace hydra
