#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <span>
#include <string>
#include <vector>

#include "hydra/errors.hpp"

namespace hydra {

enum class WaveletFamily { Morlet, MexicanHat };

std::string_view to_string(WaveletFamily family);
WaveletFamily parse_wavelet_family(std::string_view text);

struct SpectralConfig {
    int length = 52;                // T
    std::vector<int> frequencies;   // Omega, subset of {0, ..., T/2}
    WaveletFamily family = WaveletFamily::MexicanHat;
    std::vector<double> scales;     // within [1, T/2]
    double variance_quantile = 0.5;

    /// Omega = {1, ..., T/2}, dyadic scales 2, 4, ... up to T/4.
    static SpectralConfig defaults(int length);
    void validate() const;
};

/// F_w = (1/T) |sum_{t=1..T} x_t exp(-j 2 pi w t / T)| by direct summation.
/// Any integer frequency is accepted here; SpectralConfig restricts Omega.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> dft_magnitudes(const Eigen::MatrixBase<Derived>& series,
                                                                           std::span<const int> frequencies) {
    using Scalar = typename Derived::Scalar;
    const Eigen::Index length = series.size();
    if (length < 2) throw ConfigError("DFT needs a series of length >= 2");
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out(static_cast<Eigen::Index>(frequencies.size()));
    const Scalar two_pi = Scalar(2) * Scalar(M_PI);
    for (std::size_t k = 0; k < frequencies.size(); ++k) {
        std::complex<Scalar> acc(0, 0);
        for (Eigen::Index t = 1; t <= length; ++t) {
            // reduce w * t mod T before scaling so large products keep precision
            const auto phase_index = (static_cast<long long>(frequencies[k]) * t) % length;
            const Scalar phase = -two_pi * static_cast<Scalar>(phase_index) / static_cast<Scalar>(length);
            acc += series(t - 1) * std::complex<Scalar>(std::cos(phase), std::sin(phase));
        }
        out(static_cast<Eigen::Index>(k)) = std::abs(acc) / static_cast<Scalar>(length);
    }
    return out;
}

template <typename Scalar>
Scalar mother_wavelet(WaveletFamily family, Scalar u) {
    switch (family) {
        case WaveletFamily::Morlet: return std::cos(Scalar(5) * u) * std::exp(-u * u / Scalar(2));
        case WaveletFamily::MexicanHat: {
            const Scalar c = Scalar(2) / (std::sqrt(Scalar(3)) * std::pow(Scalar(M_PI), Scalar(0.25)));
            return c * (Scalar(1) - u * u) * std::exp(-u * u / Scalar(2));
        }
    }
    return Scalar(0);
}

/// Coefficients of one scale: W(c) = sum_t x_t psi((t - t_c) / scale) / norm
/// for centers t_c = 1, 1 + stride, ... <= T with stride = max(1, round(scale)).
struct WaveletResponse {
    double scale = 1.0;
    std::vector<int> centers;
    Eigen::VectorXd coefficients;
};

std::vector<WaveletResponse> wavelet_coeffs(const Eigen::Ref<const Eigen::VectorXd>& series, WaveletFamily family,
                                            std::span<const double> scales);

struct WaveletSummary {
    double max_abs = 0.0;
    double mean_abs = 0.0;
    int argmax_center = 0;  // index into the center list
};

WaveletSummary summarize(const WaveletResponse& response);

/// Per-row spectral block: |Omega| DFT magnitudes followed by
/// (max |W|, mean |W|, argmax center) for each scale.
Eigen::MatrixXd spectral_features(const Eigen::MatrixXd& series_rows, const SpectralConfig& config);
std::vector<std::string> spectral_feature_names(const SpectralConfig& config);

/// Columns whose population variance strictly exceeds the `quantile` of all
/// column variances.
std::vector<Eigen::Index> variance_filter(const Eigen::MatrixXd& features, double quantile);
std::vector<Eigen::Index> columns_with_variance_above(const Eigen::MatrixXd& features, double threshold);
double variance_threshold(const Eigen::MatrixXd& features, double quantile);

}  // namespace hydra
