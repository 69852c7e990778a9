#pragma once

// Periodic d-dimensional lattice shared by the mean-field and many-body
// computations: spectral Laplacian, circular convolution, L2 inner product.

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "mfclt/error.hpp"

namespace mfclt {

using cplx = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;

/// Periodic lattice with L sites per dimension and spacing a. Sites are
/// numbered 0..M-1 in row-major order of their coordinates.
struct Grid {
    int d = 1;
    int L = 2;
    double a = 1.0;

    int sites() const
    {
        int m = 1;
        for (int i = 0; i < d; ++i) m *= L;
        return m;
    }
    double cell_volume() const { return std::pow(a, d); }

    std::array<int, 3> coords(int site) const
    {
        std::array<int, 3> c{0, 0, 0};
        for (int i = d - 1; i >= 0; --i) {
            c[i] = site % L;
            site /= L;
        }
        return c;
    }
    int site(const std::array<int, 3>& c) const
    {
        int s = 0;
        for (int i = 0; i < d; ++i) s = s * L + ((c[i] % L) + L) % L;
        return s;
    }

    /// Signed mode number for DFT index m: {-floor(L/2), ..., ceil(L/2)-1}.
    /// For even L the unpaired mode is the negative Nyquist one.
    int signed_mode(int m) const { return m < (L + 1) / 2 ? m : m - L; }

    /// Momentum vector 2*pi*m/(L*a) of the DFT index `k` (row-major like sites).
    std::array<double, 3> momentum(int k) const
    {
        const auto c = coords(k);
        std::array<double, 3> p{0.0, 0.0, 0.0};
        for (int i = 0; i < d; ++i)
            p[i] = 2.0 * std::numbers::pi * signed_mode(c[i]) / (L * a);
        return p;
    }
    double momentum_squared(int k) const
    {
        const auto p = momentum(k);
        return p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
    }
    std::vector<std::array<double, 3>> momentum_table() const
    {
        std::vector<std::array<double, 3>> t;
        t.reserve(sites());
        for (int k = 0; k < sites(); ++k) t.push_back(momentum(k));
        return t;
    }

    /// Minimal-image distance between two sites.
    double periodic_distance(int s1, int s2) const
    {
        const auto c1 = coords(s1);
        const auto c2 = coords(s2);
        double r2 = 0.0;
        for (int i = 0; i < d; ++i) {
            int diff = std::abs(c1[i] - c2[i]);
            diff = std::min(diff, L - diff);
            r2 += (diff * a) * (diff * a);
        }
        return std::sqrt(r2);
    }

    /// Site index of the displacement s1 - s2 (periodic).
    int displacement(int s1, int s2) const
    {
        const auto c1 = coords(s1);
        const auto c2 = coords(s2);
        std::array<int, 3> c{0, 0, 0};
        for (int i = 0; i < d; ++i) c[i] = c1[i] - c2[i];
        return site(c);
    }

    friend bool operator==(const Grid& x, const Grid& y)
    {
        return x.d == y.d && x.L == y.L && x.a == y.a;
    }
};

inline Grid make_grid(int d, int L, double a)
{
    detail::require(d >= 1 && d <= 3, "grid: d must be 1, 2 or 3");
    detail::require(L >= 2, "grid: L must be at least 2");
    detail::require(a > 0.0 && std::isfinite(a), "grid: spacing a must be positive");
    return Grid{d, L, a};
}

/// Complex wavefunction sampled on the lattice sites.
struct Field {
    Grid grid;
    CVector values;

    Field() = default;
    Field(const Grid& g, CVector v) : grid(g), values(std::move(v))
    {
        detail::require(values.size() == grid.sites(), "field: value count does not match the grid");
    }
    static Field zero(const Grid& g) { return Field(g, CVector::Zero(g.sites())); }

    /// Coefficients in the orthonormal site basis, sqrt(a^d) * values.
    CVector modes() const { return values * std::sqrt(grid.cell_volume()); }
    static Field from_modes(const Grid& g, const CVector& m)
    {
        return Field(g, m / std::sqrt(g.cell_volume()));
    }

    Field& operator+=(const Field& o)
    {
        detail::require(grid == o.grid, "field: grid mismatch");
        values += o.values;
        return *this;
    }
    Field& operator-=(const Field& o)
    {
        detail::require(grid == o.grid, "field: grid mismatch");
        values -= o.values;
        return *this;
    }
    Field& operator*=(cplx s)
    {
        values *= s;
        return *this;
    }
    friend Field operator+(Field x, const Field& y) { return x += y; }
    friend Field operator-(Field x, const Field& y) { return x -= y; }
    friend Field operator*(cplx s, Field x) { return x *= s; }
};

/// Two-body potential sampled at lattice displacements; values[s] = v(x_s).
struct Potential {
    Grid grid;
    RVector values;

    Potential() = default;
    Potential(const Grid& g, RVector v) : grid(g), values(std::move(v))
    {
        detail::require(values.size() == grid.sites(), "potential: value count does not match the grid");
        detail::require(values.allFinite(), "potential: values must be finite");
    }

    bool is_even(double tol = 1e-14) const
    {
        for (int s = 0; s < grid.sites(); ++s) {
            const int ms = grid.displacement(0, s);
            if (std::abs(values[s] - values[ms]) > tol * std::max(1.0, values.cwiseAbs().maxCoeff()))
                return false;
        }
        return true;
    }
    double at_displacement(int s1, int s2) const { return values[grid.displacement(s1, s2)]; }
    double max_abs() const { return values.cwiseAbs().maxCoeff(); }
};

/// g * exp(-r^2 / 2w^2) with r the periodic distance to the origin.
inline Potential gaussian_potential(const Grid& g, double strength, double width)
{
    detail::require(width > 0.0, "potential: gaussian width must be positive");
    RVector v(g.sites());
    for (int s = 0; s < g.sites(); ++s) {
        const double r = g.periodic_distance(s, 0);
        v[s] = strength * std::exp(-r * r / (2.0 * width * width));
    }
    return Potential(g, v);
}

inline Potential constant_potential(const Grid& g, double c)
{
    return Potential(g, RVector::Constant(g.sites(), c));
}

/// Lattice delta: v(0) = strength / a^d, zero elsewhere.
inline Potential delta_potential(const Grid& g, double strength = 1.0)
{
    RVector v = RVector::Zero(g.sites());
    v[0] = strength / g.cell_volume();
    return Potential(g, v);
}

namespace detail {

// In-place DFT along every axis of a row-major d-dimensional array.
inline void dft_axes(const Grid& g, CVector& data, bool inverse)
{
    static thread_local Eigen::FFT<double> fft;
    const int L = g.L;
    const int M = g.sites();
    std::vector<cplx> in(L), out(L);
    int stride = 1;
    for (int axis = g.d - 1; axis >= 0; --axis) {
        const int block = stride * L;
        for (int base = 0; base < M; base += block) {
            for (int off = 0; off < stride; ++off) {
                for (int i = 0; i < L; ++i) in[i] = data[base + off + i * stride];
                if (inverse)
                    fft.inv(out, in);
                else
                    fft.fwd(out, in);
                for (int i = 0; i < L; ++i) data[base + off + i * stride] = out[i];
            }
        }
        stride *= L;
    }
}

} // namespace detail

/// Unnormalized forward DFT over all axes (sum_x f(x) e^{-ip.x}).
inline CVector dft_forward(const Grid& g, CVector f)
{
    detail::require(f.size() == g.sites(), "dft: size mismatch");
    detail::dft_axes(g, f, false);
    return f;
}

/// Inverse of dft_forward (includes the 1/M factor).
inline CVector dft_inverse(const Grid& g, CVector f)
{
    detail::require(f.size() == g.sites(), "dft: size mismatch");
    detail::dft_axes(g, f, true);
    return f;
}

/// Spectral -Laplacian: multiply every Fourier mode by |p|^2.
inline Field laplacian_apply(const Grid& g, const Field& f)
{
    detail::require(f.grid == g, "laplacian: grid mismatch");
    CVector hat = dft_forward(g, f.values);
    for (int k = 0; k < g.sites(); ++k) hat[k] *= g.momentum_squared(k);
    return Field(g, dft_inverse(g, hat));
}

/// Free propagator e^{i Delta t} = e^{-i |p|^2 t} applied spectrally.
inline Field free_propagate(const Grid& g, const Field& f, double t)
{
    detail::require(f.grid == g, "free_propagate: grid mismatch");
    CVector hat = dft_forward(g, f.values);
    for (int k = 0; k < g.sites(); ++k) hat[k] *= std::exp(cplx(0.0, -g.momentum_squared(k) * t));
    return Field(g, dft_inverse(g, hat));
}

/// Dense matrix of -Laplacian in the orthonormal site basis.
inline CMatrix laplacian_matrix(const Grid& g)
{
    const int M = g.sites();
    CMatrix T(M, M);
    for (int y = 0; y < M; ++y) {
        CVector e = CVector::Zero(M);
        e[y] = 1.0;
        T.col(y) = laplacian_apply(g, Field(g, e)).values;
    }
    return T;
}

/// (v * rho)(x) = a^d sum_y v(x - y) rho(y), periodic.
inline RVector convolve(const Grid& g, const Potential& v, const RVector& rho)
{
    detail::require(v.grid == g, "convolve: potential lives on a different grid");
    detail::require(rho.size() == g.sites(), "convolve: length mismatch");
    const int M = g.sites();
    RVector out = RVector::Zero(M);
    for (int x = 0; x < M; ++x) {
        double acc = 0.0;
        for (int y = 0; y < M; ++y) acc += v.at_displacement(x, y) * rho[y];
        out[x] = g.cell_volume() * acc;
    }
    return out;
}

/// L2 inner product a^d sum conj(f) g, antilinear in the first slot.
inline cplx inner(const Field& f, const Field& g)
{
    detail::require(f.grid == g.grid, "inner: grid mismatch");
    return f.grid.cell_volume() * f.values.dot(g.values);
}

inline double norm2(const Field& f) { return inner(f, f).real(); }

inline Field normalized(const Field& f)
{
    const double n = norm2(f);
    detail::require(n > 0.0, "normalized: zero field");
    return (1.0 / std::sqrt(n)) * f;
}

inline RVector density(const Field& f) { return f.values.cwiseAbs2(); }

/// e^{i p.x} for the DFT index `k`, normalized to unit L2 norm.
inline Field plane_wave(const Grid& g, int k)
{
    detail::require(k >= 0 && k < g.sites(), "plane_wave: momentum index out of range");
    const auto p = g.momentum(k);
    CVector v(g.sites());
    for (int s = 0; s < g.sites(); ++s) {
        const auto c = g.coords(s);
        double phase = 0.0;
        for (int i = 0; i < g.d; ++i) phase += p[i] * c[i] * g.a;
        v[s] = std::exp(cplx(0.0, phase));
    }
    return normalized(Field(g, v));
}

/// Periodic Gaussian packet exp(-r^2/2w^2) e^{i p.x} around `center_site`,
/// carrying the momentum of DFT index `k`; normalized.
inline Field gaussian_packet(const Grid& g, int center_site, double width, int k)
{
    detail::require(width > 0.0, "gaussian_packet: width must be positive");
    const Field wave = plane_wave(g, k);
    CVector v(g.sites());
    for (int s = 0; s < g.sites(); ++s) {
        const double r = g.periodic_distance(s, center_site);
        v[s] = std::exp(-r * r / (2.0 * width * width)) * wave.values[s];
    }
    return normalized(Field(g, v));
}

} // namespace mfclt
