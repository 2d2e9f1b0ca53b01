#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace oracle {

double mean(std::span<const double> v) {
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double variance_pop(std::span<const double> v) {
    const double m = mean(v);
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size());
}

static double quantile7(std::span<const double> v, double p) {
    std::vector<double> s(v.begin(), v.end());
    std::sort(s.begin(), s.end());
    const double h = p * (static_cast<double>(s.size()) - 1.0);
    const size_t i = static_cast<size_t>(h);
    if (i + 1 >= s.size()) return s.back();
    const double frac = h - static_cast<double>(i);
    return s[i] * (1.0 - frac) + s[i + 1] * frac;
}

double median(std::span<const double> v) { return quantile7(v, 0.5); }
double iqr(std::span<const double> v) { return quantile7(v, 0.75) - quantile7(v, 0.25); }

double skewness(std::span<const double> v) {
    const double m = mean(v);
    double m2 = 0, m3 = 0;
    for (double x : v) {
        m2 += (x - m) * (x - m);
        m3 += (x - m) * (x - m) * (x - m);
    }
    m2 /= static_cast<double>(v.size());
    m3 /= static_cast<double>(v.size());
    return m2 > 0 ? m3 / std::sqrt(m2 * m2 * m2) : 0.0;
}

double kurtosis_excess(std::span<const double> v) {
    const double m = mean(v);
    double m2 = 0, m4 = 0;
    for (double x : v) {
        m2 += (x - m) * (x - m);
        m4 += (x - m) * (x - m) * (x - m) * (x - m);
    }
    m2 /= static_cast<double>(v.size());
    m4 /= static_cast<double>(v.size());
    return m2 > 0 ? m4 / (m2 * m2) - 3.0 : 0.0;
}

double rmssd(std::span<const double> v) {
    double s = 0;
    for (size_t i = 1; i < v.size(); ++i) s += (v[i] - v[i - 1]) * (v[i] - v[i - 1]);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

std::vector<std::complex<double>> dft(std::span<const double> x, size_t nfft) {
    std::vector<std::complex<double>> out(nfft);
    for (size_t k = 0; k < nfft; ++k) {
        std::complex<double> acc(0, 0);
        for (size_t n = 0; n < x.size() && n < nfft; ++n) {
            const double ang = -2.0 * std::numbers::pi * static_cast<double>(k) *
                               static_cast<double>(n) / static_cast<double>(nfft);
            acc += x[n] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        out[k] = acc;
    }
    return out;
}

double sparc(std::span<const double> speed, double fs_hz, double cutoff_hz, double amp_thresh) {
    size_t nfft = 1;
    while (nfft < speed.size()) nfft *= 2;
    nfft *= 16;
    const auto spec = dft(speed, nfft);
    const double dc = std::abs(spec[0]);
    std::vector<double> freq, amp;
    for (size_t k = 0; k <= nfft / 2; ++k) {
        const double f = fs_hz * static_cast<double>(k) / static_cast<double>(nfft);
        if (f > cutoff_hz) break;
        freq.push_back(f);
        amp.push_back(std::abs(spec[k]) / dc);
    }
    size_t last = 0;
    for (size_t k = 0; k < amp.size(); ++k)
        if (amp[k] >= amp_thresh) last = k;
    const double frange = freq[last] - freq[0];
    double arc = 0;
    for (size_t k = 1; k <= last; ++k) {
        const double df = (freq[k] - freq[k - 1]) / frange;
        const double da = amp[k] - amp[k - 1];
        arc += std::sqrt(df * df + da * da);
    }
    return -arc;
}

double sampen(std::span<const double> v, int m, double r) {
    const int n = static_cast<int>(v.size());
    // Both lengths range over the same template start positions (those that
    // admit an m+1 extension), per the standard definition.
    long b = 0, a = 0;
    for (int i = 0; i + m <= n - 1; ++i) {
        for (int j = 0; j + m <= n - 1; ++j) {
            if (i == j) continue;
            bool okm = true;
            for (int k = 0; k < m; ++k)
                if (std::fabs(v[static_cast<size_t>(i + k)] - v[static_cast<size_t>(j + k)]) > r) {
                    okm = false;
                    break;
                }
            if (!okm) continue;
            ++b;
            if (std::fabs(v[static_cast<size_t>(i + m)] - v[static_cast<size_t>(j + m)]) <= r) ++a;
        }
    }
    if (a == 0 || b == 0) throw std::runtime_error("oracle sampen undefined");
    return -std::log(static_cast<double>(a) / static_cast<double>(b));
}

double band_fraction(std::span<const double> x, double fs_hz, double f_lo, double f_hi,
                     double total_lo, double total_hi) {
    std::vector<double> centered(x.begin(), x.end());
    const double m = mean(centered);
    for (double& v : centered) v -= m;
    const auto spec = dft(centered, centered.size());
    double band = 0, total = 0;
    for (size_t k = 1; k <= centered.size() / 2; ++k) {
        const double f = fs_hz * static_cast<double>(k) / static_cast<double>(centered.size());
        const double p = std::norm(spec[k]);
        if (f >= total_lo && f < total_hi) total += p;
        if (f >= f_lo && f < f_hi) band += p;
    }
    return total > 0 ? band / total : 0.0;
}

double ols_sse(const eml::Matrix& x, std::span<const double> y) {
    const size_t n = x.rows, p = x.cols;
    // normal equations
    std::vector<std::vector<double>> a(p, std::vector<double>(p + 1, 0.0));
    for (size_t j = 0; j < p; ++j) {
        for (size_t k = 0; k < p; ++k) {
            double s = 0;
            for (size_t i = 0; i < n; ++i) s += x(i, j) * x(i, k);
            a[j][k] = s;
        }
        double s = 0;
        for (size_t i = 0; i < n; ++i) s += x(i, j) * y[i];
        a[j][p] = s;
    }
    // Gauss-Jordan with partial pivoting
    for (size_t col = 0; col < p; ++col) {
        size_t piv = col;
        for (size_t r = col + 1; r < p; ++r)
            if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
        std::swap(a[col], a[piv]);
        if (std::fabs(a[col][col]) < 1e-12) throw std::runtime_error("oracle ols: singular");
        const double d = a[col][col];
        for (size_t c = col; c <= p; ++c) a[col][c] /= d;
        for (size_t r = 0; r < p; ++r) {
            if (r == col) continue;
            const double f = a[r][col];
            for (size_t c = col; c <= p; ++c) a[r][c] -= f * a[col][c];
        }
    }
    double sse = 0;
    for (size_t i = 0; i < n; ++i) {
        double pred = 0;
        for (size_t j = 0; j < p; ++j) pred += x(i, j) * a[j][p];
        sse += (y[i] - pred) * (y[i] - pred);
    }
    return sse;
}

double spearman_brown_alpha(int k, double r) {
    return static_cast<double>(k) * r / (1.0 + (static_cast<double>(k) - 1.0) * r);
}

eml::Matrix equicorrelated_items(size_t n, size_t k, double r, uint64_t seed) {
    // Build k+1 vectors orthonormal under population statistics (mean 0,
    // var 1, zero cross-moments), then mix: x_i = sqrt(r) f + sqrt(1-r) u_i.
    eml::Rng rng(seed);
    std::vector<std::vector<double>> basis;
    while (basis.size() < k + 1) {
        std::vector<double> v(n);
        for (double& x : v) x = rng.normal();
        double m = mean(v);
        for (double& x : v) x -= m;
        for (const auto& b : basis) {
            double dot = 0;
            for (size_t i = 0; i < n; ++i) dot += v[i] * b[i];
            dot /= static_cast<double>(n);
            for (size_t i = 0; i < n; ++i) v[i] -= dot * b[i];
        }
        m = mean(v);
        for (double& x : v) x -= m;
        const double sd = std::sqrt(variance_pop(v));
        if (sd < 1e-9) continue;
        for (double& x : v) x /= sd;
        basis.push_back(std::move(v));
    }
    eml::Matrix items(n, k);
    const double wf = std::sqrt(r), wu = std::sqrt(1.0 - r);
    for (size_t j = 0; j < k; ++j)
        for (size_t i = 0; i < n; ++i)
            items(i, j) = wf * basis[0][i] + wu * basis[j + 1][i];
    return items;
}

}  // namespace oracle
