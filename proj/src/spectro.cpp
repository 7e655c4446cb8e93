#include "hydra/spectro.hpp"

#include <algorithm>

#include "hydra/core_data.hpp"

namespace hydra {

std::string_view to_string(WaveletFamily family) {
    return family == WaveletFamily::Morlet ? "morlet" : "mexican_hat";
}

WaveletFamily parse_wavelet_family(std::string_view text) {
    if (text == "morlet") return WaveletFamily::Morlet;
    if (text == "mexican_hat") return WaveletFamily::MexicanHat;
    throw ConfigError("unknown wavelet family \"" + std::string(text) + "\"");
}

SpectralConfig SpectralConfig::defaults(int length) {
    SpectralConfig config;
    config.length = length;
    for (int w = 1; w <= length / 2; ++w) config.frequencies.push_back(w);
    for (double s = 2.0; s <= length / 4.0; s *= 2.0) config.scales.push_back(s);
    return config;
}

void SpectralConfig::validate() const {
    if (length < 2) throw ConfigError("spectral series length must be at least 2");
    for (int w : frequencies) {
        if (w < 0 || w > length / 2) throw ConfigError("frequency " + std::to_string(w) + " outside {0, ..., T/2}");
    }
    for (double s : scales) {
        if (!(s >= 1.0 && s <= length / 2.0)) throw ConfigError("wavelet scale outside [1, T/2]");
    }
}

std::vector<WaveletResponse> wavelet_coeffs(const Eigen::Ref<const Eigen::VectorXd>& series, WaveletFamily family,
                                            std::span<const double> scales) {
    const Eigen::Index length = series.size();
    std::vector<WaveletResponse> out;
    for (double scale : scales) {
        if (!(scale >= 1.0 && scale <= length / 2.0)) throw ConfigError("wavelet scale outside [1, T/2]");
        const int reach = static_cast<int>(std::ceil(8.0 * scale));
        double norm_sq = 0.0;
        for (int k = -reach; k <= reach; ++k) {
            const double v = mother_wavelet(family, k / scale);
            norm_sq += v * v;
        }
        const double inv_norm = 1.0 / std::sqrt(norm_sq);
        const int stride = std::max(1, static_cast<int>(std::lround(scale)));

        WaveletResponse response;
        response.scale = scale;
        for (int c = 1; c <= length; c += stride) response.centers.push_back(c);
        response.coefficients.resize(static_cast<Eigen::Index>(response.centers.size()));
        for (std::size_t k = 0; k < response.centers.size(); ++k) {
            const int c = response.centers[k];
            const int lo = std::max<int>(1, c - reach), hi = std::min<int>(static_cast<int>(length), c + reach);
            double acc = 0.0;
            for (int t = lo; t <= hi; ++t) acc += series(t - 1) * mother_wavelet(family, (t - c) / scale);
            response.coefficients(static_cast<Eigen::Index>(k)) = acc * inv_norm;
        }
        out.push_back(std::move(response));
    }
    return out;
}

WaveletSummary summarize(const WaveletResponse& response) {
    WaveletSummary s;
    if (response.coefficients.size() == 0) return s;
    Eigen::Index arg = 0;
    s.max_abs = response.coefficients.cwiseAbs().maxCoeff(&arg);
    s.mean_abs = response.coefficients.cwiseAbs().mean();
    s.argmax_center = static_cast<int>(arg);
    return s;
}

std::vector<std::string> spectral_feature_names(const SpectralConfig& config) {
    std::vector<std::string> names;
    for (int w : config.frequencies) names.push_back("dft_" + std::to_string(w));
    for (double s : config.scales) {
        const std::string tag = "wav" + std::to_string(static_cast<int>(std::lround(s)));
        names.push_back(tag + "_max");
        names.push_back(tag + "_mean");
        names.push_back(tag + "_argmax");
    }
    return names;
}

Eigen::MatrixXd spectral_features(const Eigen::MatrixXd& series_rows, const SpectralConfig& config) {
    config.validate();
    if (series_rows.cols() != config.length) throw ShapeError("spectral features: series length does not match T");
    const auto n_freq = static_cast<Eigen::Index>(config.frequencies.size());
    Eigen::MatrixXd out(series_rows.rows(), n_freq + 3 * static_cast<Eigen::Index>(config.scales.size()));
    for (Eigen::Index i = 0; i < series_rows.rows(); ++i) {
        const Eigen::VectorXd s = series_rows.row(i).transpose();
        out.row(i).head(n_freq) = dft_magnitudes(s, config.frequencies).transpose();
        const auto responses = wavelet_coeffs(s, config.family, config.scales);
        Eigen::Index c = n_freq;
        for (const auto& r : responses) {
            const auto summary = summarize(r);
            out(i, c++) = summary.max_abs;
            out(i, c++) = summary.mean_abs;
            out(i, c++) = summary.argmax_center;
        }
    }
    return out;
}

namespace {

Eigen::VectorXd column_variances(const Eigen::MatrixXd& features) {
    if (features.rows() < 2) throw DataError("variance filter needs at least two rows");
    const Eigen::RowVectorXd mean = features.colwise().mean();
    return ((features.rowwise() - mean).array().square().colwise().sum() / static_cast<double>(features.rows()))
        .transpose();
}

}  // namespace

double variance_threshold(const Eigen::MatrixXd& features, double quantile_level) {
    const Eigen::VectorXd var = column_variances(features);
    return quantile(std::vector<double>(var.data(), var.data() + var.size()), quantile_level);
}

std::vector<Eigen::Index> columns_with_variance_above(const Eigen::MatrixXd& features, double threshold) {
    const Eigen::VectorXd var = column_variances(features);
    std::vector<Eigen::Index> keep;
    for (Eigen::Index j = 0; j < var.size(); ++j) {
        if (var(j) > threshold) keep.push_back(j);
    }
    return keep;
}

std::vector<Eigen::Index> variance_filter(const Eigen::MatrixXd& features, double quantile_level) {
    if (features.cols() == 0) return {};
    return columns_with_variance_above(features, variance_threshold(features, quantile_level));
}

}  // namespace hydra
