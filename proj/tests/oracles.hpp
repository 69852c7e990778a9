#pragma once

// Independent reference computations. Nothing here calls into the library
// routines being checked; only plain containers and Eigen are shared.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <set>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using cplx = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;

inline long ipow(long b, int e)
{
    long r = 1;
    for (int i = 0; i < e; ++i) r *= b;
    return r;
}

/// Digits of a row-major tensor index, most significant first.
inline std::vector<int> digits(long index, int M, int n)
{
    std::vector<int> d(n);
    for (int i = n - 1; i >= 0; --i) {
        d[i] = static_cast<int>(index % M);
        index /= M;
    }
    return d;
}

inline long undigits(const std::vector<int>& d, int M)
{
    long x = 0;
    for (int v : d) x = x * M + v;
    return x;
}

// --- multi-indices ---------------------------------------------------------------------

/// Every ordered k-tuple of pairwise distinct labels from 1..N.
inline std::vector<std::vector<int>> multi_indices(int N, int k)
{
    std::vector<std::vector<int>> out;
    std::vector<int> cur;
    std::function<void()> rec = [&] {
        if (static_cast<int>(cur.size()) == k) {
            out.push_back(cur);
            return;
        }
        for (int i = 1; i <= N; ++i) {
            if (std::find(cur.begin(), cur.end(), i) != cur.end()) continue;
            cur.push_back(i);
            rec();
            cur.pop_back();
        }
    };
    rec();
    return out;
}

/// Ordered pairs of multi-indices whose label sets share exactly `shared` labels.
inline long shared_pairs(int N, int k, int shared)
{
    const auto all = multi_indices(N, k);
    long count = 0;
    for (const auto& a : all)
        for (const auto& b : all) {
            int common = 0;
            for (int x : a)
                if (std::find(b.begin(), b.end(), x) != b.end()) ++common;
            if (common == shared) ++count;
        }
    return count;
}

// --- first quantization --------------------------------------------------------------

/// (O acting on the listed slots) applied to a vector of the n-fold tensor
/// power of C^M. Slot j of O meets tensor factor slots[j] (0-based).
inline CVector apply_on_slots(const CMatrix& O, int k, int M, int n, const std::vector<int>& slots, const CVector& in)
{
    const long dim = ipow(M, n);
    const long ok = ipow(M, k);
    CVector out = CVector::Zero(dim);
    for (long x = 0; x < dim; ++x) {
        std::vector<int> dx = digits(x, M, n);
        std::vector<int> rowd(k);
        for (int j = 0; j < k; ++j) rowd[j] = dx[slots[j]];
        const long r = undigits(rowd, M);
        cplx acc = 0.0;
        for (long c = 0; c < ok; ++c) {
            const std::vector<int> cd = digits(c, M, k);
            std::vector<int> dy = dx;
            for (int j = 0; j < k; ++j) dy[slots[j]] = cd[j];
            acc += O(r, c) * in[undigits(dy, M)];
        }
        out[x] = acc;
    }
    return out;
}

/// Dense matrix of sum over ordered distinct slot tuples of O on those slots.
inline CMatrix first_quantized_sum(const CMatrix& O, int k, int M, int n)
{
    const long dim = ipow(M, n);
    CMatrix S = CMatrix::Zero(dim, dim);
    for (const auto& idx : multi_indices(n, k)) {
        std::vector<int> slots(k);
        for (int j = 0; j < k; ++j) slots[j] = idx[j] - 1;
        for (long c = 0; c < dim; ++c) {
            CVector e = CVector::Zero(dim);
            e[c] = 1.0;
            S.col(c) += apply_on_slots(O, k, M, n, slots, e);
        }
    }
    return S;
}

/// n-particle first-quantized Hamiltonian sum_i T_i + (1/N) sum_{i<j} v(x_i - x_j)
/// with T given in the orthonormal site basis and vdisp(x, y) = v(x - y).
inline CMatrix first_quantized_hamiltonian(const CMatrix& T, const std::function<double(int, int)>& vdisp, int M, int n,
                                           double N)
{
    CMatrix H = first_quantized_sum(T, 1, M, n);
    const long dim = ipow(M, n);
    for (long x = 0; x < dim; ++x) {
        const auto d = digits(x, M, n);
        double w = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) w += vdisp(d[i], d[j]);
        H(x, x) += w / N;
    }
    return H;
}

/// Columns: normalized symmetric tensors for the given occupation vectors.
inline CMatrix symmetric_embedding(const std::vector<std::vector<int>>& occupations, int M, int n)
{
    const long dim = ipow(M, n);
    CMatrix E = CMatrix::Zero(dim, static_cast<long>(occupations.size()));
    for (long x = 0; x < dim; ++x) {
        std::vector<int> occ(M, 0);
        for (int v : digits(x, M, n)) ++occ[v];
        for (std::size_t c = 0; c < occupations.size(); ++c)
            if (occupations[c] == occ) E(x, static_cast<long>(c)) = 1.0;
    }
    for (long c = 0; c < E.cols(); ++c) E.col(c).normalize();
    return E;
}

/// phi^{(x) n} as a plain vector.
inline CVector product_state(const CVector& phi, int n)
{
    CVector out = CVector::Ones(1);
    for (int i = 0; i < n; ++i) {
        CVector next(out.size() * phi.size());
        for (long a = 0; a < out.size(); ++a)
            for (long b = 0; b < phi.size(); ++b) next[a * phi.size() + b] = out[a] * phi[b];
        out = std::move(next);
    }
    return out;
}

/// Variance of sum_{i_k} O~_{i_k} in phi^{(x)n} by brute force: with O~ = O - <O>,
/// the variance is ||S psi||^2 where S is the centered sum.
inline double brute_force_product_variance(const CMatrix& O, int k, const CVector& phi, int n)
{
    const int M = static_cast<int>(phi.size());
    const CVector pk = product_state(phi, k);
    const cplx mean = pk.dot(O * pk);
    const CMatrix centered = O - mean * CMatrix::Identity(O.rows(), O.cols());
    const CVector psi = product_state(phi, n);
    CVector s = CVector::Zero(psi.size());
    for (const auto& idx : multi_indices(n, k)) {
        std::vector<int> slots(k);
        for (int j = 0; j < k; ++j) slots[j] = idx[j] - 1;
        s += apply_on_slots(centered, k, M, n, slots, psi);
    }
    return s.squaredNorm();
}

// --- probability ------------------------------------------------------------------------

inline double poisson_pmf(double lambda, int n)
{
    return std::exp(-lambda + n * std::log(lambda) - std::lgamma(n + 1.0));
}

inline double poisson_tail_above(double lambda, int nmax)
{
    double cdf = 0.0;
    for (int n = 0; n <= nmax; ++n) cdf += poisson_pmf(lambda, n);
    return 1.0 - cdf;
}

inline cplx poisson_char_fn(double lambda, double tau)
{
    return std::exp(lambda * (std::exp(cplx(0.0, tau)) - 1.0));
}

inline double normal_cdf(double x, double sigma) { return 0.5 * std::erfc(-x / (sigma * std::sqrt(2.0))); }

/// sup_x |F(x) - Phi(x)| scanned on a uniform grid, evaluating both one-sided
/// limits of the step function at grid points.
inline double grid_scan_ks(const std::vector<double>& xs, const std::vector<double>& ws, double sigma, double lo,
                           double hi, double step)
{
    double best = 0.0;
    const long n = static_cast<long>(std::floor((hi - lo) / step + 0.5));
    for (long i = 0; i <= n; ++i) {
        const double x = lo + static_cast<double>(i) * step;
        double right = 0.0, left = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            if (xs[i] <= x) right += ws[i];
            if (xs[i] < x) left += ws[i];
        }
        const double g = normal_cdf(x, sigma);
        best = std::max({best, std::abs(right - g), std::abs(left - g)});
    }
    return best;
}

} // namespace oracle
