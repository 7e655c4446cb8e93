#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>

#include "helpers.hpp"
#include "hydra/errors.hpp"
#include "hydra/spectro.hpp"

using namespace hydra;

namespace {

std::vector<int> range(int lo, int hi) {
    std::vector<int> v(static_cast<std::size_t>(hi - lo + 1));
    std::iota(v.begin(), v.end(), lo);
    return v;
}

// Brute-force mean |W| per scale with the wavelet sampled over the whole
// series and normalized by its energy on a wide symmetric grid.
double naive_mean_abs(const Eigen::VectorXd& x, double scale) {
    double norm = 0;
    for (int k = -2000; k <= 2000; ++k) norm += std::pow(mother_wavelet(WaveletFamily::MexicanHat, k / scale), 2);
    norm = std::sqrt(norm);
    const int stride = std::max(1, static_cast<int>(std::lround(scale)));
    const auto t_len = static_cast<int>(x.size());
    double total = 0;
    int centers = 0;
    for (int c = 1; c <= t_len; c += stride) {
        double acc = 0;
        for (int t = 1; t <= t_len; ++t) acc += x(t - 1) * mother_wavelet(WaveletFamily::MexicanHat, (t - c) / scale);
        total += std::abs(acc / norm);
        ++centers;
    }
    return total / centers;
}

}  // namespace

TEST_CASE("dft: constant series is DC only") {
    const Eigen::VectorXd x = Eigen::VectorXd::Constant(12, -1.5);
    const Eigen::VectorXd f = dft_magnitudes(x, std::span<const int>(range(0, 6)));
    CHECK(f(0) == doctest::Approx(1.5).epsilon(1e-14));
    for (Eigen::Index w = 1; w < f.size(); ++w) CHECK(f(w) < 1e-12);
}

TEST_CASE("dft: a single tone at frequency 3") {
    Eigen::VectorXd x(52);
    for (int t = 1; t <= 52; ++t) x(t - 1) = std::cos(2 * M_PI * t * 3 / 52.0);
    const Eigen::VectorXd f = dft_magnitudes(x, std::span<const int>(range(0, 26)));
    for (Eigen::Index w = 0; w < f.size(); ++w) CHECK(f(w) == doctest::Approx(w == 3 ? 0.5 : 0.0).epsilon(1e-12).scale(1.0));
}

TEST_CASE("dft: Parseval, shift invariance and scaling") {
    Rng rng(41);
    const Eigen::VectorXd x = test::random_vector(rng, 16);
    const Eigen::VectorXd full = dft_magnitudes(x, std::span<const int>(range(0, 15)));
    CHECK(x.squaredNorm() == doctest::Approx(16 * full.squaredNorm()).epsilon(1e-12));

    Eigen::VectorXd shifted(16);
    for (int t = 0; t < 16; ++t) shifted((t + 5) % 16) = x(t);
    CHECK((dft_magnitudes(shifted, std::span<const int>(range(0, 8))) - dft_magnitudes(x, std::span<const int>(range(0, 8))))
              .cwiseAbs()
              .maxCoeff() < 1e-9);
    const Eigen::VectorXd scaled = -2.5 * x;
    CHECK(dft_magnitudes(scaled, std::span<const int>(range(0, 8)))
              .isApprox(2.5 * dft_magnitudes(x, std::span<const int>(range(0, 8))), 1e-12));
}

TEST_CASE("dft: long double instantiation agrees") {
    Rng rng(42);
    const Eigen::VectorXd x = test::random_vector(rng, 20);
    const Eigen::Matrix<long double, Eigen::Dynamic, 1> xl = x.cast<long double>();
    const auto fl = dft_magnitudes(xl, std::span<const int>(range(0, 10)));
    const auto fd = dft_magnitudes(x, std::span<const int>(range(0, 10)));
    CHECK((fl.cast<double>() - fd).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("wavelets: zero series, impulse localization and linearity") {
    const std::vector<double> scales{1.0, 2.0, 4.0};
    for (auto family : {WaveletFamily::MexicanHat, WaveletFamily::Morlet}) {
        const auto zero = wavelet_coeffs(Eigen::VectorXd::Zero(24), family, scales);
        for (const auto& r : zero) CHECK((r.coefficients.array() == 0.0).all());
    }
    Eigen::VectorXd impulse = Eigen::VectorXd::Zero(24);
    impulse(9) = 1.0;  // t = 10
    const auto r = wavelet_coeffs(impulse, WaveletFamily::MexicanHat, scales);
    const WaveletSummary s = summarize(r.front());
    CHECK(r.front().centers[static_cast<std::size_t>(s.argmax_center)] == 10);

    Rng rng(43);
    const Eigen::VectorXd a = test::random_vector(rng, 24), b = test::random_vector(rng, 24);
    const Eigen::VectorXd combo = 2.0 * a - 0.5 * b;
    const auto ra = wavelet_coeffs(a, WaveletFamily::Morlet, scales);
    const auto rb = wavelet_coeffs(b, WaveletFamily::Morlet, scales);
    const auto rc = wavelet_coeffs(combo, WaveletFamily::Morlet, scales);
    for (std::size_t k = 0; k < scales.size(); ++k) {
        CHECK((rc[k].coefficients - (2.0 * ra[k].coefficients - 0.5 * rb[k].coefficients)).cwiseAbs().maxCoeff() < 1e-12);
    }
    CHECK_THROWS_AS(parse_wavelet_family("haar"), ConfigError);
    CHECK_THROWS_AS(wavelet_coeffs(a, WaveletFamily::Morlet, std::vector<double>{20.0}), ConfigError);
}

TEST_CASE("wavelets: scale selection for a Gaussian bump matches a brute-force scan") {
    const std::vector<double> grid{1, 1.5, 2, 3, 4, 6, 8, 12, 16};
    for (double width : {1.0, 2.0, 3.0}) {
        Eigen::VectorXd bump(64);
        for (int t = 1; t <= 64; ++t) bump(t - 1) = std::exp(-0.5 * std::pow((t - 33) / width, 2));
        const auto responses = wavelet_coeffs(bump, WaveletFamily::MexicanHat, grid);
        std::size_t best = 0, oracle_best = 0;
        double oracle_top = -1;
        for (std::size_t k = 0; k < grid.size(); ++k) {
            const double mean = summarize(responses[k]).mean_abs;
            const double naive = naive_mean_abs(bump, grid[k]);
            CHECK(mean == doctest::Approx(naive).epsilon(1e-9));
            if (mean > summarize(responses[best]).mean_abs) best = k;
            if (naive > oracle_top) {
                oracle_top = naive;
                oracle_best = k;
            }
        }
        CHECK(best == oracle_best);
    }
}

TEST_CASE("variance filter") {
    const Eigen::MatrixXd constant = Eigen::MatrixXd::Ones(10, 4);
    CHECK(variance_filter(constant, 0.5).empty());

    Eigen::MatrixXd one = Eigen::MatrixXd::Ones(10, 5);
    one.col(2) = Eigen::VectorXd::LinSpaced(10, 0, 9);
    CHECK(variance_filter(one, 0.5) == std::vector<Eigen::Index>{2});

    Rng rng(44);
    Eigen::MatrixXd m(30, 20);
    for (Eigen::Index j = 0; j < 20; ++j) m.col(j) = test::random_vector(rng, 30) * (1.0 + static_cast<double>(j % 7));
    const auto kept = variance_filter(m, 0.75);
    std::vector<std::pair<double, Eigen::Index>> var;
    for (Eigen::Index j = 0; j < 20; ++j) {
        const double mean = m.col(j).mean();
        var.push_back({(m.col(j).array() - mean).square().mean(), j});
    }
    std::sort(var.begin(), var.end());
    std::vector<Eigen::Index> oracle;
    for (std::size_t k = 15; k < 20; ++k) oracle.push_back(var[k].second);
    std::sort(oracle.begin(), oracle.end());
    CHECK(kept == oracle);

    const double threshold = variance_threshold(m, 0.75);
    const Eigen::MatrixXd subset = m(Eigen::all, kept);
    CHECK(columns_with_variance_above(subset, threshold).size() == kept.size());
}
