#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hydra/core_data.hpp"

namespace hydra {

enum class DriftKind { CoefficientFlip, MeanShift, CategoryInflux };

std::string_view to_string(DriftKind kind);
DriftKind parse_drift_kind(std::string_view text);

/// Takes effect from `week` onward.
///   coefficient_flip: linear coefficients become -magnitude * beta
///   mean_shift:       linear features x1..x3 shift by +magnitude
///   category_influx:  a `magnitude` fraction of rows draw unseen cat_high levels
struct DriftEvent {
    int week = 2;
    DriftKind kind = DriftKind::CoefficientFlip;
    double magnitude = 1.0;
};

/// Weekly client rows with planted effects. For row i in week w:
///
///   logit_i = intercept
///           + linear_strength * c(w) * (0.8 x1 - 0.6 x2 + 0.4 x3)
///           + interaction_strength * u * v
///           + periodic_strength * (a_i - 1)
///           + relational_strength * r_employer(i)
///           + low_effect[cat_low] + high_effect[cat_high]
///
/// with u, v, x1..x3 ~ N(0, 1), amplitude a_i ~ U(0, 2), employer latent
/// r_e ~ N(0, 1), the observed peer signal peer_i = r_e + N(0, peer_noise^2),
/// and the weekly series hist_t = a_i cos(2 pi omega t / T + phi_i) + N(0, 1),
/// t = 1..T, phi_i ~ U(0, 2 pi). c(w) is 1 before a coefficient flip.
/// x3 is missing with probability `missing_rate`. Weeks are 1..weeks.
struct SyntheticSpec {
    int weeks = 10;
    int rows_per_week = 400;
    int series_length = 52;
    int periodic_frequency = 4;
    int employers = 80;
    int noise_features = 2;
    double intercept = -1.0;
    double linear_strength = 1.0;
    double interaction_strength = 1.0;
    double periodic_strength = 1.0;
    double relational_strength = 1.0;
    double category_strength = 0.5;
    double peer_noise = 1.5;
    double missing_rate = 0.05;
    std::vector<DriftEvent> drift;

    void validate() const;

    /// The default 10-week drift fixture: a coefficient flip at week 5, a
    /// mean shift at week 7 and a category influx at week 8.
    static SyntheticSpec drift_fixture();
};

Schema synthetic_schema(const SyntheticSpec& spec);

FeatureFrame generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

}  // namespace hydra
