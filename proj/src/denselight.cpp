#include "hydra/denselight.hpp"

#include <algorithm>
#include <sstream>

#include "hydra/format.hpp"
#include "hydra/random.hpp"

namespace hydra {

void DenseLightConfig::validate() const {
    if (width < 1 || blocks < 0) throw ConfigError("denselight width must be positive and blocks non-negative");
    if (gap_groups < 1 || width % gap_groups != 0) throw ConfigError("denselight.gap_groups must divide the width");
    if (!(smoothing >= 0.0 && smoothing < 1.0)) throw ConfigError("denselight.smoothing must lie in [0, 1)");
    if (!(learning_rate >= 0.0)) throw ConfigError("denselight.learning_rate must be non-negative");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("denselight.momentum must lie in [0, 1)");
    if (batch_size < 1) throw ConfigError("denselight.batch_size must be positive");
    if (max_epochs < 0 || fine_tune_epochs < 0) throw ConfigError("denselight epoch counts must be non-negative");
    if (patience < 1) throw ConfigError("denselight.patience must be positive");
    if (!(fine_tune_factor >= 0.0)) throw ConfigError("denselight.fine_tune_factor must be non-negative");
}

namespace {

Eigen::MatrixXd uniform_matrix(Eigen::Index rows, Eigen::Index cols, double limit, Rng& rng) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.uniform(-limit, limit);
    }
    return m;
}

template <typename F>
void for_each_tensor(DenseLightModel& m, F&& f) {
    f(m.w_in);
    f(m.b_in);
    for (auto& b : m.blocks) {
        f(b.ln_gamma);
        f(b.ln_beta);
        f(b.wf);
        f(b.ws);
        f(b.bs);
    }
    f(m.w_out);
}

}  // namespace

DenseLightModel DenseLightModel::initialize(Eigen::Index input_dim, const DenseLightConfig& config) {
    config.validate();
    Rng rng(config.seed);
    const Eigen::Index d = config.width;
    DenseLightModel m;
    m.gap_groups = config.gap_groups;
    m.smoothing = config.smoothing;
    m.w_in = uniform_matrix(d, input_dim, std::sqrt(6.0 / static_cast<double>(input_dim + d)), rng);
    m.b_in = Eigen::VectorXd::Zero(d);
    for (int l = 0; l < config.blocks; ++l) {
        DenseBlock b;
        b.ln_gamma = Eigen::VectorXd::Ones(d);
        b.ln_beta = Eigen::VectorXd::Zero(d);
        b.wf = uniform_matrix(d, d, std::sqrt(3.0 / static_cast<double>(d)), rng);
        b.ws = uniform_matrix(d, config.gap_groups, std::sqrt(6.0 / static_cast<double>(d + config.gap_groups)), rng);
        b.bs = Eigen::VectorXd::Zero(d);
        m.blocks.push_back(std::move(b));
    }
    m.w_out = uniform_matrix(d, 1, std::sqrt(6.0 / static_cast<double>(d + 1)), rng).col(0);
    m.b_out = 0.0;
    return m;
}

Eigen::Index DenseLightModel::parameter_count() const {
    Eigen::Index n = 1;
    for_each_tensor(const_cast<DenseLightModel&>(*this), [&](const auto& t) { n += t.size(); });
    return n;
}

Eigen::VectorXd DenseLightModel::flatten() const {
    Eigen::VectorXd p(parameter_count());
    Eigen::Index o = 0;
    for_each_tensor(const_cast<DenseLightModel&>(*this), [&](const auto& t) {
        p.segment(o, t.size()) = t.reshaped();
        o += t.size();
    });
    p(o) = b_out;
    return p;
}

void DenseLightModel::unflatten(const Eigen::Ref<const Eigen::VectorXd>& p) {
    if (p.size() != parameter_count()) throw ShapeError("denselight: parameter vector has the wrong length");
    Eigen::Index o = 0;
    for_each_tensor(*this, [&](auto& t) {
        t.reshaped() = p.segment(o, t.size());
        o += t.size();
    });
    b_out = p(o);
}

// ---------------------------------------------------------------------------
// Forward and backward

namespace {

Eigen::MatrixXd group_means(const Eigen::MatrixXd& h, int groups) {
    const Eigen::Index size = h.cols() / groups;
    Eigen::MatrixXd g(h.rows(), groups);
    for (int k = 0; k < groups; ++k) g.col(k) = h.middleCols(k * size, size).rowwise().mean();
    return g;
}

struct BlockCache {
    Eigen::MatrixXd h;      // input to the block
    Eigen::MatrixXd norm;   // LN(h) before scale/shift
    Eigen::VectorXd inv_std;
    Eigen::MatrixXd u;      // gamma * norm + beta
    Eigen::MatrixXd pre;    // u W_f^T
    Eigen::MatrixXd act;    // GELU(pre)
    Eigen::MatrixXd pooled;
    Eigen::MatrixXd gate;
};

struct Cache {
    std::vector<BlockCache> blocks;
    Eigen::MatrixXd top;
    Eigen::VectorXd logits;
};

Cache forward_cached(const DenseLightModel& model, const Eigen::MatrixXd& x) {
    if (x.cols() != model.input_dim()) {
        throw ShapeError("denselight: input has " + std::to_string(x.cols()) + " columns, model expects " +
                         std::to_string(model.input_dim()));
    }
    Cache c;
    Eigen::MatrixXd h = (x * model.w_in.transpose()).rowwise() + model.b_in.transpose();
    const double d = static_cast<double>(model.width());
    for (const auto& block : model.blocks) {
        BlockCache b;
        b.h = h;
        const Eigen::VectorXd mean = h.rowwise().mean();
        const Eigen::MatrixXd centered = h.colwise() - mean;
        b.inv_std = ((centered.array().square().rowwise().sum() / d) + kLayerNormEpsilon).rsqrt();
        b.norm = centered.array().colwise() * b.inv_std.array();
        b.u = (b.norm.array().rowwise() * block.ln_gamma.transpose().array()).rowwise() + block.ln_beta.transpose().array();
        b.pre = b.u * block.wf.transpose();
        b.act = b.pre.unaryExpr([](double v) { return gelu(v); });
        b.pooled = group_means(h, model.gap_groups);
        b.gate = ((b.pooled * block.ws.transpose()).rowwise() + block.bs.transpose()).unaryExpr([](double v) {
            return sigmoid(v);
        });
        h += b.gate.cwiseProduct(b.act);
        c.blocks.push_back(std::move(b));
    }
    c.logits = (h * model.w_out).array() + model.b_out;
    c.top = std::move(h);
    return c;
}

double clip(double p) { return std::clamp(p, kProbabilityClip, 1.0 - kProbabilityClip); }

/// Objective value and d objective / d logit per row.
double objective_and_dlogits(const Eigen::VectorXd& logits, const Eigen::VectorXi& labels, double smoothing,
                             const ConsistencyTerm* consistency, Eigen::VectorXd* dlogits) {
    const Eigen::Index n = logits.size();
    const double inv_n = 1.0 / static_cast<double>(n);
    double loss = 0.0;
    if (dlogits) dlogits->resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double z = logits(i);
        const double ybar = (1.0 - smoothing) * labels(i) + smoothing / 2.0;
        const double p = sigmoid(z);
        // -[ybar log p + (1 - ybar) log(1 - p)] = softplus(z) - ybar z
        loss += std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))) - ybar * z;
        double d = p - ybar;
        if (consistency && consistency->gamma != 0.0) {
            const double ps = clip(consistency->other(i) + consistency->alpha * p);
            const double pt = clip(consistency->target(i));
            loss += consistency->gamma * binary_kl(ps, pt);
            const double dkl = std::log(ps / pt) - std::log((1.0 - ps) / (1.0 - pt));
            d += consistency->gamma * dkl * consistency->alpha * p * (1.0 - p);
        }
        if (dlogits) (*dlogits)(i) = d * inv_n;
    }
    return loss * inv_n;
}

void check_consistency(const ConsistencyTerm* consistency, Eigen::Index rows) {
    if (consistency && (consistency->other.size() != rows || consistency->target.size() != rows)) {
        throw ShapeError("denselight: consistency vectors must match the batch");
    }
}

}  // namespace

DenseForward dense_forward(const DenseLightModel& model, const Eigen::MatrixXd& inputs) {
    auto c = forward_cached(model, inputs);
    DenseForward f;
    f.probabilities = c.logits.unaryExpr([](double z) { return sigmoid(z); });
    f.logits = std::move(c.logits);
    for (auto& b : c.blocks) f.gates.push_back(std::move(b.gate));
    return f;
}

Eigen::VectorXd dense_predict(const DenseLightModel& model, const Eigen::MatrixXd& inputs) {
    return forward_cached(model, inputs).logits.unaryExpr([](double z) { return sigmoid(z); });
}

double smoothed_loss(const Eigen::Ref<const Eigen::VectorXi>& labels, const Eigen::Ref<const Eigen::VectorXd>& probs,
                     double epsilon) {
    if (labels.size() != probs.size()) throw ShapeError("smoothed_loss: labels and probabilities differ in length");
    if (labels.size() == 0) return 0.0;
    double total = 0.0;
    for (Eigen::Index i = 0; i < labels.size(); ++i) {
        const double ybar = (1.0 - epsilon) * labels(i) + epsilon / 2.0;
        const double p = clip(probs(i));
        total -= ybar * std::log(p) + (1.0 - ybar) * std::log(1.0 - p);
    }
    return total / static_cast<double>(labels.size());
}

double binary_kl(double p_star, double p_target) {
    const double p = clip(p_star), q = clip(p_target);
    return p * std::log(p / q) + (1.0 - p) * std::log((1.0 - p) / (1.0 - q));
}

double dense_objective(const DenseLightModel& model, const Eigen::MatrixXd& inputs, const Eigen::VectorXi& labels,
                       const ConsistencyTerm* consistency) {
    if (inputs.rows() != labels.size()) throw ShapeError("denselight: inputs and labels differ in rows");
    check_consistency(consistency, inputs.rows());
    if (inputs.rows() == 0) return 0.0;
    return objective_and_dlogits(forward_cached(model, inputs).logits, labels, model.smoothing, consistency, nullptr);
}

DenseGradient dense_loss_gradient(const DenseLightModel& model, const Eigen::MatrixXd& inputs,
                                  const Eigen::VectorXi& labels, const ConsistencyTerm* consistency) {
    if (inputs.rows() != labels.size()) throw ShapeError("denselight: inputs and labels differ in rows");
    if (inputs.rows() == 0) throw DataError("denselight: empty batch");
    check_consistency(consistency, inputs.rows());
    const auto c = forward_cached(model, inputs);
    DenseGradient out;
    Eigen::VectorXd dlogits;
    out.loss = objective_and_dlogits(c.logits, labels, model.smoothing, consistency, &dlogits);

    DenseLightModel g = model;
    g.w_out = c.top.transpose() * dlogits;
    g.b_out = dlogits.sum();
    Eigen::MatrixXd dh = dlogits * model.w_out.transpose();
    const double d = static_cast<double>(model.width());
    const Eigen::Index group = model.width() / model.gap_groups;
    for (std::size_t l = model.blocks.size(); l-- > 0;) {
        const auto& block = model.blocks[l];
        const auto& b = c.blocks[l];
        auto& gb = g.blocks[l];
        // h_out = h + s * a
        const Eigen::MatrixXd ds = dh.cwiseProduct(b.act);
        const Eigen::MatrixXd da = dh.cwiseProduct(b.gate);
        Eigen::MatrixXd dh_in = dh;

        const Eigen::MatrixXd dq = ds.array() * b.gate.array() * (1.0 - b.gate.array());
        gb.ws = dq.transpose() * b.pooled;
        gb.bs = dq.colwise().sum().transpose();
        const Eigen::MatrixXd dpooled = dq * block.ws;
        for (int k = 0; k < model.gap_groups; ++k) {
            dh_in.middleCols(k * group, group).colwise() += dpooled.col(k) / static_cast<double>(group);
        }

        const Eigen::MatrixXd dpre = da.cwiseProduct(b.pre.unaryExpr([](double v) { return gelu_grad(v); }));
        gb.wf = dpre.transpose() * b.u;
        const Eigen::MatrixXd du = dpre * block.wf;
        gb.ln_gamma = du.cwiseProduct(b.norm).colwise().sum().transpose();
        gb.ln_beta = du.colwise().sum().transpose();
        const Eigen::MatrixXd dn = du.array().rowwise() * block.ln_gamma.transpose().array();
        const Eigen::VectorXd mean_dn = dn.rowwise().sum() / d;
        const Eigen::VectorXd mean_dn_n = dn.cwiseProduct(b.norm).rowwise().sum() / d;
        Eigen::MatrixXd dnorm = dn.colwise() - mean_dn;
        dnorm -= (b.norm.array().colwise() * mean_dn_n.array()).matrix();
        dh_in += (dnorm.array().colwise() * b.inv_std.array()).matrix();
        dh = std::move(dh_in);
    }
    g.w_in = dh.transpose() * inputs;
    g.b_in = dh.colwise().sum().transpose();
    out.gradient = g.flatten();
    return out;
}

// ---------------------------------------------------------------------------
// Training

namespace {

ConsistencyTerm slice(const ConsistencyTerm& term, const std::vector<Eigen::Index>& rows) {
    ConsistencyTerm s;
    s.alpha = term.alpha;
    s.gamma = term.gamma;
    s.other.resize(static_cast<Eigen::Index>(rows.size()));
    s.target.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t k = 0; k < rows.size(); ++k) {
        s.other(static_cast<Eigen::Index>(k)) = term.other(rows[k]);
        s.target(static_cast<Eigen::Index>(k)) = term.target(rows[k]);
    }
    return s;
}

double validation_loss(const DenseLightModel& model, const DenseBatch& validation) {
    if (validation.inputs.rows() == 0) return 0.0;
    return smoothed_loss(validation.labels, dense_predict(model, validation.inputs), model.smoothing);
}

}  // namespace

DenseLightModel dense_train(DenseLightModel model, const DenseBatch& train, const DenseBatch& validation,
                            const DenseLightConfig& config, int max_epochs, double learning_rate, DenseTrainLog* log,
                            const ConsistencyTerm* consistency) {
    config.validate();
    if (train.inputs.rows() != train.labels.size() || validation.inputs.rows() != validation.labels.size()) {
        throw ShapeError("denselight: inputs and labels differ in rows");
    }
    check_consistency(consistency, train.inputs.rows());
    DenseTrainLog local;
    const bool use_validation = validation.inputs.rows() > 0;
    auto score = [&](const DenseLightModel& m) {
        return use_validation ? validation_loss(m, validation) : dense_objective(m, train.inputs, train.labels, consistency);
    };
    local.train_loss.push_back(train.inputs.rows() > 0 ? dense_objective(model, train.inputs, train.labels, consistency) : 0.0);
    local.validation_loss.push_back(score(model));
    if (max_epochs <= 0 || train.inputs.rows() == 0) {
        if (log) *log = std::move(local);
        return model;
    }

    Eigen::VectorXd params = model.flatten();
    Eigen::VectorXd velocity = Eigen::VectorXd::Zero(params.size());
    Eigen::VectorXd best = params;
    double best_loss = local.validation_loss.front();
    const auto n = static_cast<std::size_t>(train.inputs.rows());
    const auto batch = static_cast<std::size_t>(config.batch_size);
    int since_best = 0;
    for (int epoch = 1; epoch <= max_epochs; ++epoch) {
        Rng rng(mix64(config.seed, static_cast<std::uint64_t>(epoch)));
        const auto order = rng.permutation(n);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t stop = std::min(n, start + batch);
            std::vector<Eigen::Index> rows(order.begin() + static_cast<std::ptrdiff_t>(start),
                                           order.begin() + static_cast<std::ptrdiff_t>(stop));
            const Eigen::MatrixXd xb = train.inputs(rows, Eigen::all);
            const Eigen::VectorXi yb = train.labels(rows);
            model.unflatten(params);
            DenseGradient step;
            if (consistency) {
                const auto part = slice(*consistency, rows);
                step = dense_loss_gradient(model, xb, yb, &part);
            } else {
                step = dense_loss_gradient(model, xb, yb);
            }
            if (!std::isfinite(step.loss) || !step.gradient.allFinite()) {
                throw TrainingError("denselight training produced a non-finite loss at epoch " + std::to_string(epoch));
            }
            epoch_loss += step.loss * static_cast<double>(stop - start);
            velocity = config.momentum * velocity - learning_rate * step.gradient;
            params += velocity;
        }
        model.unflatten(params);
        const double val = score(model);
        if (!std::isfinite(val)) {
            throw TrainingError("denselight validation loss is non-finite at epoch " + std::to_string(epoch));
        }
        local.train_loss.push_back(epoch_loss / static_cast<double>(n));
        local.validation_loss.push_back(val);
        local.stop_epoch = epoch;
        if (val < best_loss) {
            best_loss = val;
            best = params;
            local.best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= config.patience) {
            break;
        }
    }
    model.unflatten(best);
    if (log) *log = std::move(local);
    return model;
}

DenseLightModel dense_fine_tune(DenseLightModel model, const DenseBatch& train, const DenseBatch& validation,
                                const DenseLightConfig& config, int epochs, DenseTrainLog* log,
                                const ConsistencyTerm* consistency) {
    return dense_train(std::move(model), train, validation, config, epochs,
                       config.learning_rate * config.fine_tune_factor, log, consistency);
}

// ---------------------------------------------------------------------------
// Serialization
//
//   hydra-denselight 1
//   input_dim <F>
//   width <d>
//   blocks <L>
//   gap_groups <d_gap>
//   smoothing <eps>
//   params <count> <p_1> ... <p_count>     (flatten() order)

std::string DenseLightModel::serialize() const {
    std::ostringstream out;
    out << "hydra-denselight 1\n";
    out << "input_dim " << input_dim() << '\n';
    out << "width " << width() << '\n';
    out << "blocks " << blocks.size() << '\n';
    out << "gap_groups " << gap_groups << '\n';
    out << "smoothing " << format_double(smoothing) << '\n';
    const Eigen::VectorXd p = flatten();
    out << "params " << p.size();
    for (Eigen::Index k = 0; k < p.size(); ++k) out << ' ' << format_double(p(k));
    out << '\n';
    return out.str();
}

DenseLightModel DenseLightModel::deserialize(const std::string& text) {
    std::istringstream in(text);
    auto expect = [&](const std::string& key) {
        std::string k, v;
        if (!(in >> k >> v) || k != key) throw DataError("denselight model file: expected \"" + key + "\"");
        return v;
    };
    if (expect("hydra-denselight") != "1") throw DataError("unsupported denselight format version");
    const auto input_dim = parse_int<Eigen::Index>(expect("input_dim"));
    DenseLightConfig config;
    config.width = parse_int<int>(expect("width"));
    config.blocks = parse_int<int>(expect("blocks"));
    config.gap_groups = parse_int<int>(expect("gap_groups"));
    config.smoothing = parse_double(expect("smoothing"));
    DenseLightModel model = initialize(input_dim, config);
    const auto count = parse_int<Eigen::Index>(expect("params"));
    if (count != model.parameter_count()) throw DataError("denselight model file: parameter count mismatch");
    Eigen::VectorXd p(count);
    for (Eigen::Index k = 0; k < count; ++k) {
        std::string tok;
        if (!(in >> tok)) throw DataError("denselight model file truncated");
        p(k) = parse_double(tok);
    }
    model.unflatten(p);
    return model;
}

}  // namespace hydra
