#pragma once

// Self-contained numeric kernels shared across the library: deterministic
// RNG, radix-2 FFT, Welch PSD, biquad filters, symmetric eigensolver,
// least squares, and the incomplete-beta family used for p-values.

#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace eml {

// ---------------------------------------------------------------------------
// Deterministic RNG. Distributions are implemented here rather than taken
// from <random> so that a fixed seed yields identical streams on every
// platform and standard library.
// ---------------------------------------------------------------------------

uint64_t splitmix64(uint64_t& state);

// Derive a child seed from a parent seed and a path of indices; used for
// per-trial / per-fold generation so work can be reordered or parallelized
// without changing output.
uint64_t derive_seed(uint64_t seed, std::initializer_list<uint64_t> path);

class Rng {
public:
    explicit Rng(uint64_t seed);

    uint64_t next_u64();
    double uniform01();                    // [0,1), 53-bit
    double uniform(double lo, double hi);
    double normal();                       // standard normal, polar method
    double normal(double mu, double sigma) { return mu + sigma * normal(); }
    uint64_t uniform_int(uint64_t n);      // [0,n), unbiased

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i)
            std::swap(v[i - 1], v[uniform_int(i)]);
    }

private:
    uint64_t s_[4];
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// ---------------------------------------------------------------------------
// Basic descriptive statistics. Variance/skewness/kurtosis use population
// moments throughout the library.
// ---------------------------------------------------------------------------

double mean(std::span<const double> x);
double variance_pop(std::span<const double> x);                // 1/n
double variance_pop(std::span<const double> x, double mu);
double stddev_pop(std::span<const double> x);

// Linear-interpolation quantile (the R-7 / numpy default rule). p in [0,1].
double quantile(std::vector<double> sorted_or_not, double p);

// Pearson correlation of two equal-length series.
double pearson(std::span<const double> x, std::span<const double> y);

// ---------------------------------------------------------------------------
// FFT and spectra
// ---------------------------------------------------------------------------

size_t next_pow2(size_t n);

// In-place radix-2 FFT; size must be a power of two.
void fft(std::vector<std::complex<double>>& a, bool inverse = false);

// Magnitude spectrum of a real signal zero-padded to nfft (power of two).
std::vector<double> magnitude_spectrum(std::span<const double> x, size_t nfft);

struct Psd {
    std::vector<double> freq;   // Hz, one-sided
    std::vector<double> power;  // units^2 / Hz
};

// Welch PSD: mean-detrended Hann-tapered segments with 50% overlap,
// one-sided density scaling. seg_len is clipped to the signal length and
// each segment is zero-padded to the next power of two.
Psd welch_psd(std::span<const double> x, double fs_hz, size_t seg_len);

// Integrate a PSD over [f_lo, f_hi) by trapezoid with interpolated band
// edges, so that contiguous bands sum exactly to the integral of their union.
double band_power(const Psd& psd, double f_lo, double f_hi);

// ---------------------------------------------------------------------------
// IIR biquads (RBJ designs, Q = 1/sqrt(2) for Butterworth response)
// ---------------------------------------------------------------------------

struct Biquad {
    double b0, b1, b2, a1, a2;
    std::vector<double> process(std::span<const double> x) const;
};

Biquad butterworth_lowpass(double fc_hz, double fs_hz);
Biquad butterworth_highpass(double fc_hz, double fs_hz);

// Sliding maximum over a centered window of `half` samples each side.
std::vector<double> sliding_max(std::span<const double> x, size_t half);

// Linear interpolation of (xs, ys) sampled at uniformly spaced points
// t0, t0+dt, ... (n points). xs must be strictly increasing.
std::vector<double> interp_linear(std::span<const double> xs, std::span<const double> ys,
                                  double t0, double dt, size_t n);

// ---------------------------------------------------------------------------
// Small dense linear algebra, enough for the statistics and linear learners.
// ---------------------------------------------------------------------------

struct Matrix {
    size_t rows = 0, cols = 0;
    std::vector<double> a;  // row-major

    Matrix() = default;
    Matrix(size_t r, size_t c) : rows(r), cols(c), a(r * c, 0.0) {}
    double& operator()(size_t i, size_t j) { return a[i * cols + j]; }
    double operator()(size_t i, size_t j) const { return a[i * cols + j]; }
};

struct EigenSym {
    std::vector<double> values;   // descending
    Matrix vectors;               // column j pairs with values[j]
};

// Cyclic Jacobi for symmetric matrices.
EigenSym eigen_symmetric(const Matrix& m);

struct LstSq {
    std::vector<double> coef;
    double sse = 0.0;
    size_t rank = 0;
    bool full_rank = false;
};

// Householder QR with column pivoting; minimum-norm-ish solution with
// rank detection (pivots below rel_tol * |largest pivot| are dropped).
LstSq least_squares(const Matrix& x, std::span<const double> y, double rel_tol = 1e-10);

// Solve (A)x = b for symmetric positive definite A via Cholesky.
std::vector<double> solve_spd(Matrix a, std::vector<double> b);

// ---------------------------------------------------------------------------
// Special functions / p-values
// ---------------------------------------------------------------------------

// Regularized incomplete beta I_x(a, b).
double incbeta(double a, double b, double x);

// Upper-tail p of the F distribution: P(F_{d1,d2} >= f).
double f_sf(double f, double d1, double d2);

// Two-sided p for Student's t with df degrees of freedom.
double t_two_sided_p(double t, double df);

double sigmoid(double x);

}  // namespace eml
