#include "hydra/synthetic.hpp"

#include <cmath>

#include "hydra/random.hpp"

namespace hydra {

std::string_view to_string(DriftKind kind) {
    switch (kind) {
        case DriftKind::CoefficientFlip: return "coefficient_flip";
        case DriftKind::MeanShift: return "mean_shift";
        case DriftKind::CategoryInflux: return "category_influx";
    }
    return "coefficient_flip";
}

DriftKind parse_drift_kind(std::string_view text) {
    if (text == "coefficient_flip") return DriftKind::CoefficientFlip;
    if (text == "mean_shift") return DriftKind::MeanShift;
    if (text == "category_influx") return DriftKind::CategoryInflux;
    throw ConfigError("unknown drift kind \"" + std::string(text) + "\"");
}

void SyntheticSpec::validate() const {
    if (weeks < 1) throw ConfigError("synthetic.weeks must be positive");
    if (rows_per_week < 1) throw ConfigError("synthetic.rows_per_week must be positive");
    if (series_length < 2) throw ConfigError("synthetic.series_length must be at least 2");
    if (periodic_frequency < 0 || periodic_frequency > series_length / 2) {
        throw ConfigError("synthetic.periodic_frequency must lie in [0, T/2]");
    }
    if (employers < 1) throw ConfigError("synthetic.employers must be positive");
    if (noise_features < 0) throw ConfigError("synthetic.noise_features must be non-negative");
    if (!(missing_rate >= 0.0 && missing_rate < 1.0)) throw ConfigError("synthetic.missing_rate must lie in [0, 1)");
    if (!(peer_noise >= 0.0)) throw ConfigError("synthetic.peer_noise must be non-negative");
    for (const auto& e : drift) {
        if (e.week < 2 || e.week > weeks) throw ConfigError("drift week " + std::to_string(e.week) + " outside [2, K]");
        if (e.kind == DriftKind::CategoryInflux && !(e.magnitude >= 0.0 && e.magnitude <= 1.0)) {
            throw ConfigError("category influx magnitude is a fraction in [0, 1]");
        }
    }
}

SyntheticSpec SyntheticSpec::drift_fixture() {
    SyntheticSpec spec;
    spec.drift = {{5, DriftKind::CoefficientFlip, 1.0}, {7, DriftKind::MeanShift, 0.5}, {8, DriftKind::CategoryInflux, 0.3}};
    return spec;
}

namespace {

constexpr int kLowLevels = 5;
constexpr int kMidLevels = 40;
constexpr int kHighLevels = 300;

}  // namespace

Schema synthetic_schema(const SyntheticSpec& spec) {
    Schema s;
    s.columns = {{"client_id", ColumnKind::Identifier}, {"week", ColumnKind::Week}, {"group", ColumnKind::Group},
                 {"default", ColumnKind::Label},       {"u", ColumnKind::Numeric},   {"v", ColumnKind::Numeric},
                 {"x1", ColumnKind::Numeric},          {"x2", ColumnKind::Numeric},  {"x3", ColumnKind::Numeric},
                 {"peer", ColumnKind::Numeric}};
    for (int k = 0; k < spec.noise_features; ++k) s.columns.push_back({"noise" + std::to_string(k), ColumnKind::Numeric});
    for (int t = 0; t < spec.series_length; ++t) s.columns.push_back({"hist_" + std::to_string(t), ColumnKind::Numeric});
    s.columns.push_back({"employer", ColumnKind::Categorical});
    s.columns.push_back({"cat_low", ColumnKind::Categorical});
    s.columns.push_back({"cat_mid", ColumnKind::Categorical});
    s.columns.push_back({"cat_high", ColumnKind::Categorical});
    s.key_columns = {"employer"};
    return s;
}

FeatureFrame generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
    spec.validate();
    const Eigen::Index n = static_cast<Eigen::Index>(spec.weeks) * spec.rows_per_week;
    FeatureFrame f = FeatureFrame::allocate(synthetic_schema(spec), n);

    // latent structure drawn from its own stream so row draws do not shift it
    Rng latent(mix64(seed, 1));
    std::vector<double> employer_effect(static_cast<std::size_t>(spec.employers));
    for (auto& r : employer_effect) r = latent.normal();
    std::vector<double> low_effect(kLowLevels), high_effect(2 * kHighLevels);
    for (auto& e : low_effect) e = latent.normal() * spec.category_strength;
    for (auto& e : high_effect) e = latent.normal() * spec.category_strength * 1.6;

    const auto col = [&](const char* name) { return f.numeric_index(name); };
    const Eigen::Index cu = col("u"), cv = col("v"), c1 = col("x1"), c2 = col("x2"), c3 = col("x3"), cpeer = col("peer");
    const Eigen::Index chist = col("hist_0");
    const Eigen::Index cnoise = spec.noise_features > 0 ? col("noise0") : 0;
    const Eigen::Index kemp = f.categorical_index("employer"), klow = f.categorical_index("cat_low"),
                       kmid = f.categorical_index("cat_mid"), khigh = f.categorical_index("cat_high");
    // register tokens in a fixed order so codes do not depend on draw order
    for (int e = 0; e < spec.employers; ++e) f.vocabularies[static_cast<std::size_t>(kemp)].add("emp" + std::to_string(e));
    for (int e = 0; e < kLowLevels; ++e) f.vocabularies[static_cast<std::size_t>(klow)].add("low" + std::to_string(e));
    for (int e = 0; e < kMidLevels; ++e) f.vocabularies[static_cast<std::size_t>(kmid)].add("mid" + std::to_string(e));
    for (int e = 0; e < 2 * kHighLevels; ++e) {
        f.vocabularies[static_cast<std::size_t>(khigh)].add("high" + std::to_string(e));
    }

    Rng rng(mix64(seed, 2));
    const double two_pi = 2.0 * M_PI;
    Eigen::Index i = 0;
    for (int w = 1; w <= spec.weeks; ++w) {
        double coef = 1.0, shift = 0.0, influx = 0.0;
        for (const auto& e : spec.drift) {
            if (w < e.week) continue;
            if (e.kind == DriftKind::CoefficientFlip) coef = -e.magnitude;
            if (e.kind == DriftKind::MeanShift) shift += e.magnitude;
            if (e.kind == DriftKind::CategoryInflux) influx = e.magnitude;
        }
        for (int r = 0; r < spec.rows_per_week; ++r, ++i) {
            f.identifiers[0][static_cast<std::size_t>(i)] = "c" + std::to_string(i);
            f.week(i) = w;
            f.group(i) = static_cast<int>(i);
            const double u = rng.normal(), v = rng.normal();
            const double x1 = rng.normal() + shift, x2 = rng.normal() + shift, x3 = rng.normal() + shift;
            const auto emp = static_cast<int>(rng.index(static_cast<std::uint64_t>(spec.employers)));
            const double peer = employer_effect[static_cast<std::size_t>(emp)] + spec.peer_noise * rng.normal();
            const double amplitude = rng.uniform(0.0, 2.0), phase = rng.uniform(0.0, two_pi);
            const auto low = static_cast<int>(rng.index(kLowLevels));
            const auto mid = static_cast<int>(rng.index(kMidLevels));
            int high = static_cast<int>(rng.index(kHighLevels));
            if (influx > 0.0 && rng.bernoulli(influx)) high = kHighLevels + static_cast<int>(rng.index(kHighLevels));

            f.numeric(i, cu) = u;
            f.numeric(i, cv) = v;
            f.numeric(i, c1) = x1;
            f.numeric(i, c2) = x2;
            f.numeric(i, c3) = rng.bernoulli(spec.missing_rate) ? std::nan("") : x3;
            f.numeric(i, cpeer) = peer;
            for (int k = 0; k < spec.noise_features; ++k) f.numeric(i, cnoise + k) = rng.normal();
            for (int t = 1; t <= spec.series_length; ++t) {
                f.numeric(i, chist + t - 1) =
                    amplitude * std::cos(two_pi * spec.periodic_frequency * t / spec.series_length + phase) + rng.normal();
            }
            // codes: vocabulary position + 1, since code 0 is reserved
            f.categorical(i, kemp) = emp + 1;
            f.categorical(i, klow) = low + 1;
            f.categorical(i, kmid) = mid + 1;
            f.categorical(i, khigh) = high + 1;

            const double logit_value = spec.intercept +
                                       spec.linear_strength * coef * (0.8 * (x1 - shift) - 0.6 * (x2 - shift) + 0.4 * (x3 - shift)) +
                                       spec.interaction_strength * u * v + spec.periodic_strength * (amplitude - 1.0) +
                                       spec.relational_strength * employer_effect[static_cast<std::size_t>(emp)] +
                                       low_effect[static_cast<std::size_t>(low)] + high_effect[static_cast<std::size_t>(high)];
            (*f.label)(i) = rng.bernoulli(sigmoid(logit_value)) ? 1 : 0;
        }
    }
    f.refresh_missing_mask();
    return f;
}

}  // namespace hydra
