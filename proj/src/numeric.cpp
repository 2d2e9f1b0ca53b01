#include "eml/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <stdexcept>

namespace eml {

static uint64_t mix64(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

uint64_t splitmix64(uint64_t& state) {
    return mix64(state += 0x9e3779b97f4a7c15ull);
}

uint64_t derive_seed(uint64_t seed, std::initializer_list<uint64_t> path) {
    // Hash-combine: each path element is avalanche-mixed before folding so
    // that dense grids of small indices (users x trials) yield seed sets
    // without residual lattice structure.
    uint64_t s = mix64(seed + 0x9e3779b97f4a7c15ull);
    for (uint64_t p : path) s = mix64(s ^ mix64(p + 0x632be59bd9b4e019ull));
    return s;
}

Rng::Rng(uint64_t seed) {
    // xoshiro256** state filled from splitmix64, per its authors' advice
    uint64_t s = seed;
    for (auto& w : s_) w = splitmix64(s);
}

static inline uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

uint64_t Rng::next_u64() {
    const uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double Rng::uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

double Rng::normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    double u, v, s;
    do {
        u = 2.0 * uniform01() - 1.0;
        v = 2.0 * uniform01() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    have_spare_ = true;
    return u * m;
}

uint64_t Rng::uniform_int(uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_int: n must be positive");
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t r;
    do {
        r = next_u64();
    } while (r >= limit);
    return r % n;
}

// ---------------------------------------------------------------------------

double mean(std::span<const double> x) {
    if (x.empty()) throw std::invalid_argument("mean: empty input");
    double s = 0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

double variance_pop(std::span<const double> x, double mu) {
    if (x.empty()) throw std::invalid_argument("variance: empty input");
    double s = 0;
    for (double v : x) s += (v - mu) * (v - mu);
    return s / static_cast<double>(x.size());
}

double variance_pop(std::span<const double> x) { return variance_pop(x, mean(x)); }

double stddev_pop(std::span<const double> x) { return std::sqrt(variance_pop(x)); }

double quantile(std::vector<double> v, double p) {
    if (v.empty()) throw std::invalid_argument("quantile: empty input");
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("quantile: p outside [0,1]");
    std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1.0) * p;
    const size_t lo = static_cast<size_t>(std::floor(h));
    if (lo + 1 >= v.size()) return v.back();
    return v[lo] + (h - static_cast<double>(lo)) * (v[lo + 1] - v[lo]);
}

double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("pearson: need two equal series of length >= 2");
    const double mx = mean(x), my = mean(y);
    double sxy = 0, sxx = 0, syy = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) throw std::runtime_error("undefined correlation: zero-variance input");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

// ---------------------------------------------------------------------------

size_t next_pow2(size_t n) {
    size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

void fft(std::vector<std::complex<double>>& a, bool inverse) {
    const size_t n = a.size();
    if (n == 0 || (n & (n - 1)) != 0) throw std::invalid_argument("fft: size must be a power of two");
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        const double ang = 2.0 * std::numbers::pi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (size_t k = 0; k < len / 2; ++k) {
                const auto u = a[i + k];
                const auto v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
    if (inverse)
        for (auto& v : a) v /= static_cast<double>(n);
}

std::vector<double> magnitude_spectrum(std::span<const double> x, size_t nfft) {
    std::vector<std::complex<double>> buf(nfft, {0.0, 0.0});
    for (size_t i = 0; i < x.size() && i < nfft; ++i) buf[i] = x[i];
    fft(buf);
    std::vector<double> mag(nfft);
    for (size_t i = 0; i < nfft; ++i) mag[i] = std::abs(buf[i]);
    return mag;
}

Psd welch_psd(std::span<const double> x, double fs_hz, size_t seg_len) {
    if (x.size() < 4) throw std::invalid_argument("welch_psd: signal too short");
    if (fs_hz <= 0) throw std::invalid_argument("welch_psd: fs must be positive");
    const size_t seg = std::min(seg_len, x.size());
    const size_t step = std::max<size_t>(1, seg / 2);
    const size_t nfft = next_pow2(seg);

    std::vector<double> window(seg);
    double u = 0;  // sum of squared taper
    for (size_t i = 0; i < seg; ++i) {
        window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                         static_cast<double>(seg - 1));
        u += window[i] * window[i];
    }

    const size_t nbins = nfft / 2 + 1;
    std::vector<double> acc(nbins, 0.0);
    size_t nseg = 0;
    for (size_t start = 0; start + seg <= x.size(); start += step) {
        double mu = 0;
        for (size_t i = 0; i < seg; ++i) mu += x[start + i];
        mu /= static_cast<double>(seg);
        std::vector<std::complex<double>> buf(nfft, {0.0, 0.0});
        for (size_t i = 0; i < seg; ++i) buf[i] = (x[start + i] - mu) * window[i];
        fft(buf);
        for (size_t k = 0; k < nbins; ++k) acc[k] += std::norm(buf[k]);
        ++nseg;
        if (start + seg == x.size()) break;
    }

    Psd out;
    out.freq.resize(nbins);
    out.power.resize(nbins);
    const double scale = 1.0 / (fs_hz * u * static_cast<double>(nseg));
    for (size_t k = 0; k < nbins; ++k) {
        out.freq[k] = fs_hz * static_cast<double>(k) / static_cast<double>(nfft);
        double p = acc[k] * scale;
        if (k != 0 && k != nbins - 1) p *= 2.0;  // one-sided
        out.power[k] = p;
    }
    return out;
}

static double psd_interp(const Psd& psd, double f) {
    const auto& fr = psd.freq;
    if (f <= fr.front()) return psd.power.front();
    if (f >= fr.back()) return psd.power.back();
    const auto it = std::upper_bound(fr.begin(), fr.end(), f);
    const size_t hi = static_cast<size_t>(it - fr.begin());
    const size_t lo = hi - 1;
    const double w = (f - fr[lo]) / (fr[hi] - fr[lo]);
    return psd.power[lo] + w * (psd.power[hi] - psd.power[lo]);
}

double band_power(const Psd& psd, double f_lo, double f_hi) {
    if (f_hi <= f_lo) return 0.0;
    f_lo = std::max(f_lo, psd.freq.front());
    f_hi = std::min(f_hi, psd.freq.back());
    if (f_hi <= f_lo) return 0.0;

    std::vector<double> fs{f_lo}, ps{psd_interp(psd, f_lo)};
    for (size_t k = 0; k < psd.freq.size(); ++k) {
        if (psd.freq[k] > f_lo && psd.freq[k] < f_hi) {
            fs.push_back(psd.freq[k]);
            ps.push_back(psd.power[k]);
        }
    }
    fs.push_back(f_hi);
    ps.push_back(psd_interp(psd, f_hi));

    double s = 0;
    for (size_t i = 0; i + 1 < fs.size(); ++i)
        s += 0.5 * (ps[i] + ps[i + 1]) * (fs[i + 1] - fs[i]);
    return s;
}

// ---------------------------------------------------------------------------

std::vector<double> Biquad::process(std::span<const double> x) const {
    std::vector<double> y(x.size());
    double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        const double v = b0 * x[i] + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
        x2 = x1;
        x1 = x[i];
        y2 = y1;
        y1 = v;
        y[i] = v;
    }
    return y;
}

static Biquad normalize(double b0, double b1, double b2, double a0, double a1, double a2) {
    return {b0 / a0, b1 / a0, b2 / a0, a1 / a0, a2 / a0};
}

Biquad butterworth_lowpass(double fc_hz, double fs_hz) {
    if (fc_hz <= 0 || fc_hz >= fs_hz / 2) throw std::invalid_argument("lowpass: cutoff outside (0, fs/2)");
    const double w0 = 2.0 * std::numbers::pi * fc_hz / fs_hz;
    const double alpha = std::sin(w0) / std::numbers::sqrt2;
    const double c = std::cos(w0);
    return normalize((1 - c) / 2, 1 - c, (1 - c) / 2, 1 + alpha, -2 * c, 1 - alpha);
}

Biquad butterworth_highpass(double fc_hz, double fs_hz) {
    if (fc_hz <= 0 || fc_hz >= fs_hz / 2) throw std::invalid_argument("highpass: cutoff outside (0, fs/2)");
    const double w0 = 2.0 * std::numbers::pi * fc_hz / fs_hz;
    const double alpha = std::sin(w0) / std::numbers::sqrt2;
    const double c = std::cos(w0);
    return normalize((1 + c) / 2, -(1 + c), (1 + c) / 2, 1 + alpha, -2 * c, 1 - alpha);
}

std::vector<double> sliding_max(std::span<const double> x, size_t half) {
    const size_t n = x.size();
    std::vector<double> out(n);
    std::deque<size_t> dq;  // indices, values decreasing
    size_t right = 0;
    for (size_t i = 0; i < n; ++i) {
        const size_t hi = std::min(n - 1, i + half);
        while (right <= hi) {
            while (!dq.empty() && x[dq.back()] <= x[right]) dq.pop_back();
            dq.push_back(right);
            ++right;
        }
        while (dq.front() + half < i) dq.pop_front();
        out[i] = x[dq.front()];
    }
    return out;
}

std::vector<double> interp_linear(std::span<const double> xs, std::span<const double> ys,
                                  double t0, double dt, size_t n) {
    if (xs.size() != ys.size() || xs.size() < 2)
        throw std::invalid_argument("interp_linear: need >= 2 points");
    std::vector<double> out(n);
    size_t j = 0;
    for (size_t i = 0; i < n; ++i) {
        const double t = t0 + dt * static_cast<double>(i);
        if (t <= xs.front()) {
            out[i] = ys.front();
            continue;
        }
        if (t >= xs.back()) {
            out[i] = ys.back();
            continue;
        }
        while (xs[j + 1] < t) ++j;
        const double w = (t - xs[j]) / (xs[j + 1] - xs[j]);
        out[i] = ys[j] + w * (ys[j + 1] - ys[j]);
    }
    return out;
}

// ---------------------------------------------------------------------------

EigenSym eigen_symmetric(const Matrix& m) {
    if (m.rows != m.cols || m.rows == 0) throw std::invalid_argument("eigen_symmetric: square matrix required");
    const size_t n = m.rows;
    Matrix a = m;
    Matrix v(n, n);
    for (size_t i = 0; i < n; ++i) v(i, i) = 1.0;

    double scale = 0;
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j) scale = std::max(scale, std::fabs(a(i, j)));
    if (scale == 0) scale = 1;

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0;
        for (size_t p = 0; p < n; ++p)
            for (size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (std::sqrt(off) < 1e-14 * scale * static_cast<double>(n)) break;
        for (size_t p = 0; p < n; ++p) {
            for (size_t q = p + 1; q < n; ++q) {
                if (std::fabs(a(p, q)) < 1e-300) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t i, size_t j) { return a(i, i) > a(j, j); });

    EigenSym out;
    out.values.resize(n);
    out.vectors = Matrix(n, n);
    for (size_t j = 0; j < n; ++j) {
        out.values[j] = a(order[j], order[j]);
        for (size_t i = 0; i < n; ++i) out.vectors(i, j) = v(i, order[j]);
    }
    return out;
}

LstSq least_squares(const Matrix& x, std::span<const double> y, double rel_tol) {
    const size_t n = x.rows, p = x.cols;
    if (y.size() != n || n == 0 || p == 0) throw std::invalid_argument("least_squares: shape mismatch");

    Matrix r = x;
    std::vector<double> b(y.begin(), y.end());
    std::vector<size_t> perm(p);
    for (size_t j = 0; j < p; ++j) perm[j] = j;

    std::vector<double> colnorm(p);
    for (size_t j = 0; j < p; ++j) {
        double s = 0;
        for (size_t i = 0; i < n; ++i) s += r(i, j) * r(i, j);
        colnorm[j] = s;
    }

    const size_t kmax = std::min(n, p);
    double pivot0 = 0;
    size_t rank = 0;
    for (size_t k = 0; k < kmax; ++k) {
        size_t best = k;
        double bestn = -1;
        for (size_t j = k; j < p; ++j) {
            double s = 0;
            for (size_t i = k; i < n; ++i) s += r(i, j) * r(i, j);
            if (s > bestn) {
                bestn = s;
                best = j;
            }
        }
        if (best != k) {
            for (size_t i = 0; i < n; ++i) std::swap(r.a[i * p + k], r.a[i * p + best]);
            std::swap(perm[k], perm[best]);
            std::swap(colnorm[k], colnorm[best]);
        }
        double norm = std::sqrt(bestn);
        if (k == 0) pivot0 = norm;
        if (norm <= rel_tol * pivot0 || norm == 0.0) break;

        // Householder reflector for column k
        double alpha = (r(k, k) > 0) ? -norm : norm;
        std::vector<double> vk(n - k);
        vk[0] = r(k, k) - alpha;
        for (size_t i = k + 1; i < n; ++i) vk[i - k] = r(i, k);
        double vnorm2 = 0;
        for (double vv : vk) vnorm2 += vv * vv;
        if (vnorm2 == 0) break;

        for (size_t j = k; j < p; ++j) {
            double dot = 0;
            for (size_t i = k; i < n; ++i) dot += vk[i - k] * r(i, j);
            const double f = 2.0 * dot / vnorm2;
            for (size_t i = k; i < n; ++i) r(i, j) -= f * vk[i - k];
        }
        {
            double dot = 0;
            for (size_t i = k; i < n; ++i) dot += vk[i - k] * b[i];
            const double f = 2.0 * dot / vnorm2;
            for (size_t i = k; i < n; ++i) b[i] -= f * vk[i - k];
        }
        r(k, k) = alpha;
        ++rank;
    }

    LstSq out;
    out.rank = rank;
    out.full_rank = (rank == p);

    std::vector<double> z(rank, 0.0);
    for (size_t k = rank; k-- > 0;) {
        double s = b[k];
        for (size_t j = k + 1; j < rank; ++j) s -= r(k, j) * z[j];
        z[k] = s / r(k, k);
    }
    out.coef.assign(p, 0.0);
    for (size_t k = 0; k < rank; ++k) out.coef[perm[k]] = z[k];

    double sse = 0;
    for (size_t i = 0; i < n; ++i) {
        double pred = 0;
        for (size_t j = 0; j < p; ++j) pred += x(i, j) * out.coef[j];
        const double e = y[i] - pred;
        sse += e * e;
    }
    out.sse = sse;
    return out;
}

std::vector<double> solve_spd(Matrix a, std::vector<double> b) {
    const size_t n = a.rows;
    if (a.cols != n || b.size() != n) throw std::invalid_argument("solve_spd: shape mismatch");
    // Cholesky a = L L^T
    for (size_t j = 0; j < n; ++j) {
        double d = a(j, j);
        for (size_t k = 0; k < j; ++k) d -= a(j, k) * a(j, k);
        if (d <= 0) throw std::runtime_error("solve_spd: matrix not positive definite");
        a(j, j) = std::sqrt(d);
        for (size_t i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (size_t k = 0; k < j; ++k) s -= a(i, k) * a(j, k);
            a(i, j) = s / a(j, j);
        }
    }
    for (size_t i = 0; i < n; ++i) {
        double s = b[i];
        for (size_t k = 0; k < i; ++k) s -= a(i, k) * b[k];
        b[i] = s / a(i, i);
    }
    for (size_t i = n; i-- > 0;) {
        double s = b[i];
        for (size_t k = i + 1; k < n; ++k) s -= a(k, i) * b[k];
        b[i] = s / a(i, i);
    }
    return b;
}

// ---------------------------------------------------------------------------

static double betacf(double a, double b, double x) {
    constexpr int max_it = 300;
    constexpr double eps = 3e-16, fpmin = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < fpmin) d = fpmin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_it; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) break;
    }
    return h;
}

double incbeta(double a, double b, double x) {
    if (a <= 0 || b <= 0) throw std::invalid_argument("incbeta: a,b must be positive");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double lbeta = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b);
    const double front = std::exp(lbeta + a * std::log(x) + b * std::log(1.0 - x));
    if (x < (a + 1.0) / (a + b + 2.0))
        return front * betacf(a, b, x) / a;
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double f_sf(double f, double d1, double d2) {
    if (f <= 0) return 1.0;
    return incbeta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f));
}

double t_two_sided_p(double t, double df) {
    if (df <= 0) throw std::invalid_argument("t_two_sided_p: df must be positive");
    if (std::isinf(t)) return 0.0;
    return incbeta(df / 2.0, 0.5, df / (df + t * t));
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace eml
