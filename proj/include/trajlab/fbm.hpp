#pragma once

// Fractional Brownian motion on a dyadic grid by circulant embedding of the
// increment covariance (exact in distribution, O(N log N)).

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "trajlab/rng.hpp"

namespace trajlab {
namespace detail {

// in-place iterative radix-2 FFT; sizes here are always powers of two
inline void fft_radix2(std::vector<std::complex<double>>& a, bool inverse) {
    const std::size_t n = a.size();
    if (n == 0 || (n & (n - 1)) != 0) throw std::invalid_argument("fft_radix2: size must be 2^k");
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    const double pi = std::acos(-1.0);
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = 2.0 * pi / double(len) * (inverse ? 1.0 : -1.0);
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> u = a[i + k];
                const std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
    if (inverse)
        for (auto& z : a) z /= double(n);
}

}  // namespace detail

// Path of fractional Brownian motion with Hurst index in (1/2, 3/4], sampled
// at 2^level + 1 nodes on [0, horizon], Y(0) = 0. The increment sequence has
// the exact fractional Gaussian noise covariance, so Var[Y(horizon)] equals
// horizon^(2H) and the level-L quadratic variation concentrates near
// horizon^(2H) * N^(1-2H).
inline std::vector<double> sample_fbm(double hurst, int level, std::uint64_t seed,
                                      double horizon = 1.0) {
    if (!(hurst > 0.5) || !(hurst <= 0.75))
        throw std::invalid_argument("sample_fbm: hurst must lie in (1/2, 3/4]");
    if (level < 1 || level > 24) throw std::invalid_argument("sample_fbm: level must be in [1, 24]");
    if (!(horizon > 0.0)) throw std::invalid_argument("sample_fbm: horizon must be positive");

    const std::int64_t n = std::int64_t{1} << level;
    const double d = horizon / double(n);
    const double scale = std::pow(d, 2.0 * hurst);

    // fGn autocovariance gamma(j) at lag j, unit-spacing form scaled by d^2H
    auto gamma = [&](std::int64_t j) {
        const double aj = double(j);
        return 0.5 * scale *
               (std::pow(aj + 1.0, 2.0 * hurst) - 2.0 * std::pow(aj, 2.0 * hurst) +
                std::pow(std::abs(aj - 1.0), 2.0 * hurst));
    };

    const std::size_t m = std::size_t(2 * n);
    std::vector<std::complex<double>> c(m);
    for (std::int64_t j = 0; j <= n; ++j) c[std::size_t(j)] = gamma(j);
    for (std::int64_t j = 1; j < n; ++j) c[m - std::size_t(j)] = gamma(j);
    detail::fft_radix2(c, false);

    std::vector<double> lambda(m);
    double lmax = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        lambda[j] = c[j].real();
        lmax = std::max(lmax, lambda[j]);
    }
    for (double& l : lambda) {
        if (l < -1e-9 * lmax)
            throw std::logic_error("sample_fbm: circulant embedding is not nonnegative");
        l = std::max(l, 0.0);
    }

    auto eng = make_engine(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<std::complex<double>> w(m);
    w[0] = std::sqrt(lambda[0]) * normal(eng);
    w[std::size_t(n)] = std::sqrt(lambda[std::size_t(n)]) * normal(eng);
    for (std::int64_t j = 1; j < n; ++j) {
        const double r = std::sqrt(lambda[std::size_t(j)] / 2.0);
        const std::complex<double> g(normal(eng), normal(eng));
        w[std::size_t(j)] = r * g;
        w[m - std::size_t(j)] = std::conj(r * g);
    }
    detail::fft_radix2(w, false);

    const double norm = 1.0 / std::sqrt(double(m));
    std::vector<double> y(std::size_t(n) + 1, 0.0);
    for (std::int64_t k = 0; k < n; ++k)
        y[std::size_t(k) + 1] = y[std::size_t(k)] + w[std::size_t(k)].real() * norm;
    return y;
}

}  // namespace trajlab
