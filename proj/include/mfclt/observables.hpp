#pragma once

// Bounded self-adjoint k-particle operators, multi-index combinatorics and
// the product-state fluctuation formulas built from the contraction h_j.

#include <cmath>
#include <cstdint>
#include <limits>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "mfclt/lattice.hpp"

namespace mfclt {

/// Hermitian matrix on the k-fold tensor power of the M site modes. Tensor
/// indices are row-major: (x_1, ..., x_k) -> x_1 M^{k-1} + ... + x_k.
class KOperator {
public:
    KOperator() = default;
    KOperator(int k, int modes, CMatrix matrix) : k_(k), modes_(modes), matrix_(std::move(matrix))
    {
        detail::require(k >= 1, "KOperator: rank k must be positive");
        detail::require(modes >= 1, "KOperator: mode count must be positive");
        long dim = 1;
        for (int i = 0; i < k; ++i) dim *= modes;
        detail::require(matrix_.rows() == dim && matrix_.cols() == dim, "KOperator: matrix must be M^k x M^k");
        const double scale = std::max(1.0, matrix_.cwiseAbs().maxCoeff());
        detail::require((matrix_ - matrix_.adjoint()).cwiseAbs().maxCoeff() <= 1e-12 * scale,
                        "KOperator: matrix is not Hermitian");
        matrix_ = 0.5 * (matrix_ + matrix_.adjoint()).eval();
        Eigen::SelfAdjointEigenSolver<CMatrix> es(matrix_, Eigen::EigenvaluesOnly);
        opnorm_ = es.eigenvalues().cwiseAbs().maxCoeff();
    }

    int k() const { return k_; }
    int modes() const { return modes_; }
    long dim() const { return matrix_.rows(); }
    const CMatrix& matrix() const { return matrix_; }
    double opnorm() const { return opnorm_; }

    static KOperator identity(int k, int modes)
    {
        long dim = 1;
        for (int i = 0; i < k; ++i) dim *= modes;
        return KOperator(k, modes, CMatrix::Identity(dim, dim));
    }

private:
    int k_ = 1;
    int modes_ = 1;
    CMatrix matrix_;
    double opnorm_ = 0.0;
};

// --- presets -----------------------------------------------------------------

/// 32-bit linear congruential generator, x <- 1664525 x + 1013904223 mod 2^32.
/// Fixed so that operator presets are reproducible bit-for-bit.
class Lcg32 {
public:
    explicit Lcg32(std::uint32_t seed) : state_(seed) {}
    std::uint32_t next()
    {
        state_ = 1664525u * state_ + 1013904223u;
        return state_;
    }
    /// Uniform in [-1, 1).
    double symmetric_uniform() { return 2.0 * (next() / 4294967296.0) - 1.0; }

private:
    std::uint32_t state_;
};

/// Random Hermitian operator scaled to unit operator norm. Entries are drawn
/// row by row over the upper triangle (re then im; diagonal re only).
inline KOperator random_hermitian(int k, int modes, std::uint32_t seed)
{
    long dim = 1;
    for (int i = 0; i < k; ++i) dim *= modes;
    Lcg32 rng(seed);
    CMatrix A = CMatrix::Zero(dim, dim);
    for (long i = 0; i < dim; ++i) {
        A(i, i) = rng.symmetric_uniform();
        for (long j = i + 1; j < dim; ++j) {
            const double re = rng.symmetric_uniform();
            const double im = rng.symmetric_uniform();
            A(i, j) = cplx(re, im);
            A(j, i) = cplx(re, -im);
        }
    }
    KOperator raw(k, modes, A);
    return KOperator(k, modes, A / raw.opnorm());
}

/// |f><f| for a one-particle vector f (normalized in L2 first).
inline KOperator rank_one(const Field& f)
{
    const CVector u = normalized(f).modes();
    return KOperator(1, static_cast<int>(u.size()), u * u.adjoint());
}

/// A^{(x) k}.
inline KOperator tensor_power(const KOperator& A, int k)
{
    detail::require(k >= 1, "tensor_power: k must be positive");
    CMatrix out = A.matrix();
    for (int i = 1; i < k; ++i) {
        CMatrix next(out.rows() * A.dim(), out.cols() * A.dim());
        for (long r = 0; r < out.rows(); ++r)
            for (long c = 0; c < out.cols(); ++c) next.block(r * A.dim(), c * A.dim(), A.dim(), A.dim()) = out(r, c) * A.matrix();
        out = std::move(next);
    }
    return KOperator(A.k() * k, A.modes(), out);
}

/// Dense CSV: header `row,col,re,im`, one entry per line in row-major order.
inline void write_koperator_csv(std::ostream& os, const KOperator& O)
{
    os << "row,col,re,im\n";
    os.precision(17);
    for (long r = 0; r < O.dim(); ++r)
        for (long c = 0; c < O.dim(); ++c)
            os << r << ',' << c << ',' << O.matrix()(r, c).real() << ',' << O.matrix()(r, c).imag() << '\n';
}

inline KOperator read_koperator_csv(std::istream& is, int modes)
{
    std::string line;
    detail::require(static_cast<bool>(std::getline(is, line)), "koperator csv: empty input");
    std::vector<std::tuple<long, long, cplx>> entries;
    long max_index = -1;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        detail::require(cells.size() == 4, "koperator csv: expected row,col,re,im");
        const long r = std::stol(cells[0]);
        const long c = std::stol(cells[1]);
        entries.emplace_back(r, c, cplx(std::stod(cells[2]), std::stod(cells[3])));
        max_index = std::max({max_index, r, c});
    }
    const long dim = max_index + 1;
    int k = 0;
    for (long d = 1; d < dim; d *= modes) ++k;
    long expect = 1;
    for (int i = 0; i < k; ++i) expect *= modes;
    detail::require(dim >= 1 && expect == dim, "koperator csv: dimension is not a power of the mode count");
    detail::require(static_cast<long>(entries.size()) == dim * dim, "koperator csv: matrix is incomplete");
    CMatrix A = CMatrix::Zero(dim, dim);
    for (const auto& [r, c, v] : entries) A(r, c) = v;
    return KOperator(std::max(k, 1), modes, A);
}

// --- centering and contraction -------------------------------------------------

namespace detail {

inline CVector tensor_power_vector(const CVector& u, int k)
{
    CVector out = u;
    for (int i = 1; i < k; ++i) {
        CVector next(out.size() * u.size());
        for (long a = 0; a < out.size(); ++a) next.segment(a * u.size(), u.size()) = out[a] * u;
        out = std::move(next);
    }
    return out;
}

inline void check_modes(const KOperator& O, const Field& phi)
{
    require(O.modes() == phi.grid.sites(), "observable: operator and field live on different lattices");
}

} // namespace detail

/// <phi^{(x)k}, O phi^{(x)k}>.
inline double expectation_product(const KOperator& O, const Field& phi)
{
    detail::check_modes(O, phi);
    const CVector w = detail::tensor_power_vector(phi.modes(), O.k());
    return w.dot(O.matrix() * w).real();
}

/// O - <phi^{(x)k}, O phi^{(x)k}> * Id. A result that is zero up to rounding
/// (O a multiple of the identity) is returned as the exact zero operator.
inline KOperator center_operator(const KOperator& O, const Field& phi)
{
    const double mean = expectation_product(O, phi);
    CMatrix A = O.matrix();
    A.diagonal().array() -= mean;
    const double scale = O.matrix().cwiseAbs().maxCoeff();
    if (A.cwiseAbs().maxCoeff() <= 64.0 * std::numeric_limits<double>::epsilon() * scale) A.setZero();
    return KOperator(O.k(), O.modes(), A);
}

/// Contracts every ket slot of O with phi and every bra slot except the j-th
/// (1-based) with conj(phi). For k = 1 this is O phi.
inline Field contract_h(const KOperator& O, const Field& phi, int j)
{
    detail::check_modes(O, phi);
    const int k = O.k();
    detail::require(j >= 1 && j <= k, "contract_h: slot index out of range");
    const int M = O.modes();
    const CVector u = phi.modes();
    const CVector w = O.matrix() * detail::tensor_power_vector(u, k);

    CVector h = CVector::Zero(M);
    for (long X = 0; X < w.size(); ++X) {
        long rest = X;
        cplx weight = 1.0;
        int free_index = 0;
        for (int slot = k; slot >= 1; --slot) {
            const int x = static_cast<int>(rest % M);
            rest /= M;
            if (slot == j)
                free_index = x;
            else
                weight *= std::conj(u[x]);
        }
        h[free_index] += weight * w[X];
    }
    return Field::from_modes(phi.grid, h);
}

/// (1 - |phi><phi|) f.
inline Field project_out(const Field& f, const Field& phi)
{
    return f - inner(phi, f) * phi;
}

// --- combinatorics ----------------------------------------------------------------

/// A multi-index of k pairwise distinct particle labels in 1..N.
struct MultiIndex {
    std::vector<int> entries;

    MultiIndex() = default;
    explicit MultiIndex(std::vector<int> e) : entries(std::move(e))
    {
        for (std::size_t a = 0; a < entries.size(); ++a)
            for (std::size_t b = a + 1; b < entries.size(); ++b)
                detail::require(entries[a] != entries[b], "MultiIndex: entries must be pairwise distinct");
    }
    std::size_t size() const { return entries.size(); }
};

/// Falling factorial n (n-1) ... (n-r+1); 1 for r = 0, 0 if r > n.
inline std::uint64_t falling_factorial(int n, int r)
{
    if (r > n) return 0;
    std::uint64_t out = 1;
    for (int i = 0; i < r; ++i) out *= static_cast<std::uint64_t>(n - i);
    return out;
}

inline std::uint64_t binomial(int n, int r)
{
    if (r < 0 || r > n) return 0;
    std::uint64_t out = 1;
    for (int i = 1; i <= r; ++i) out = out * static_cast<std::uint64_t>(n - r + i) / static_cast<std::uint64_t>(i);
    return out;
}

/// |I_N^(k)| = N (N-1) ... (N-k+1).
inline std::uint64_t multi_index_count(int N, int k)
{
    detail::require(k >= 1, "multi_index_count: k must be positive");
    detail::require(k <= N, "multi_index_count: k exceeds N");
    return falling_factorial(N, k);
}

/// Ordered pairs (i_k, j_k) in I_N^(k) x I_N^(k) whose label sets intersect in
/// exactly `shared` elements.
inline std::uint64_t shared_pair_count(int N, int k, int shared)
{
    detail::require(shared >= 0, "shared_pair_count: overlap must be nonnegative");
    detail::require(shared <= k, "shared_pair_count: overlap exceeds k");
    const std::uint64_t first = multi_index_count(N, k);
    // which labels of i are reused, where they sit in j, and fresh labels for the rest of j
    return first * binomial(k, shared) * falling_factorial(k, shared) * falling_factorial(N - k, k - shared);
}

/// Calls fn(const std::vector<int>&) for every ordered multi-index in
/// I_N^(k) (0-based labels), in lexicographic order.
template <typename Fn>
void for_each_multi_index(int N, int k, Fn&& fn)
{
    std::vector<int> idx(k, 0);
    std::vector<bool> used(N, false);
    auto rec = [&](auto&& self, int pos) -> void {
        if (pos == k) {
            fn(static_cast<const std::vector<int>&>(idx));
            return;
        }
        for (int v = 0; v < N; ++v) {
            if (used[v]) continue;
            used[v] = true;
            idx[pos] = v;
            self(self, pos + 1);
            used[v] = false;
        }
    };
    rec(rec, 0);
}

// --- product-state covariance ------------------------------------------------------

struct CovarianceMatrix {
    CMatrix entries; // k x k
    Field phi;

    cplx operator()(int i, int j) const { return entries(i - 1, j - 1); }
    /// sum_{i,j} M(i,j), real by Hermiticity.
    double total() const { return entries.sum().real(); }
};

/// M(i,j) = < q h_i, q h_j > with h_i = contract_h(O, phi, i) and q = 1 - |phi><phi|.
inline CovarianceMatrix factorized_covariance(const KOperator& O, const Field& phi)
{
    detail::check_modes(O, phi);
    const int k = O.k();
    std::vector<Field> qh;
    qh.reserve(k);
    for (int j = 1; j <= k; ++j) qh.push_back(project_out(contract_h(O, phi, j), phi));
    CMatrix m(k, k);
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) m(i, j) = inner(qh[i], qh[j]);
    return CovarianceMatrix{m, phi};
}

namespace detail {

// Applies a k-slot operator to the given slots of an s-slot tensor.
inline CVector apply_on_slots(const CMatrix& op, int k, int M, const std::vector<int>& slots, int s, const CVector& in)
{
    long total = 1;
    for (int i = 0; i < s; ++i) total *= M;
    std::vector<long> stride(s);
    long st = 1;
    for (int i = s - 1; i >= 0; --i) {
        stride[i] = st;
        st *= M;
    }
    const long kdim = op.rows();
    CVector out = CVector::Zero(total);
    std::vector<int> digits(s);
    for (long idx = 0; idx < total; ++idx) {
        // decode the multi-index only once per input index
        long rest = idx;
        for (int i = s - 1; i >= 0; --i) {
            digits[i] = static_cast<int>(rest % M);
            rest /= M;
        }
        long in_local = 0;
        long base = idx;
        for (int a = 0; a < k; ++a) {
            in_local = in_local * M + digits[slots[a]];
            base -= digits[slots[a]] * stride[slots[a]];
        }
        if (in[idx] == cplx(0.0)) continue;
        for (long out_local = 0; out_local < kdim; ++out_local) {
            const cplx c = op(out_local, in_local);
            if (c == cplx(0.0)) continue;
            long target = base;
            long r = out_local;
            for (int a = k - 1; a >= 0; --a) {
                target += (r % M) * stride[slots[a]];
                r /= M;
            }
            out[target] += c * in[idx];
        }
    }
    return out;
}

// E[O~_i O~_j] in the product state for one overlap pattern. pattern[p] is the
// slot of i holding j's p-th label, or -1 if that label is not in i.
inline double pattern_value(const CMatrix& centered, int k, const CVector& u, const std::vector<int>& pattern)
{
    const int M = static_cast<int>(u.size());
    std::vector<int> slots_i(k), slots_j(k);
    std::iota(slots_i.begin(), slots_i.end(), 0);
    int next = k;
    for (int p = 0; p < k; ++p) slots_j[p] = pattern[p] >= 0 ? pattern[p] : next++;
    const int s = next;
    const CVector prod = tensor_power_vector(u, s);
    const CVector a = apply_on_slots(centered, k, M, slots_i, s, prod);
    const CVector b = apply_on_slots(centered, k, M, slots_j, s, prod);
    return a.dot(b).real();
}

template <typename Sink>
void enumerate_factorized_pairs(const KOperator& O, const Field& phi, int N, Sink&& sink)
{
    const int k = O.k();
    const KOperator centered = center_operator(O, phi);
    const CVector u = phi.modes();
    std::map<std::vector<int>, double> cache;
    std::vector<std::vector<int>> all;
    for_each_multi_index(N, k, [&](const std::vector<int>& idx) { all.push_back(idx); });
    std::vector<int> pattern(k);
    for (const auto& I : all) {
        for (const auto& J : all) {
            int shared = 0;
            for (int p = 0; p < k; ++p) {
                pattern[p] = -1;
                for (int q = 0; q < k; ++q)
                    if (J[p] == I[q]) {
                        pattern[p] = q;
                        ++shared;
                    }
            }
            auto it = cache.find(pattern);
            if (it == cache.end()) it = cache.emplace(pattern, pattern_value(centered.matrix(), k, u, pattern)).first;
            sink(shared, it->second);
        }
    }
}

} // namespace detail

/// Exact variance of O_N^(k) = sum_{i_k} O~_{i_k} in phi^{(x)N}. Every pair of
/// multi-indices is enumerated; the expectation depends only on how the two
/// index sets overlap, so each overlap pattern is contracted once.
inline double factorized_variance_exact(const KOperator& O, const Field& phi, int N)
{
    detail::check_modes(O, phi);
    detail::require(N >= 2 * O.k(), "factorized_variance_exact: need N >= 2k");
    double sum = 0.0;
    detail::enumerate_factorized_pairs(O, phi, N, [&](int, double v) { sum += v; });
    return sum;
}

/// The same second moment split by the number of shared labels l = 0..k. The
/// l = 0 entry vanishes identically for the centered operator.
inline std::vector<double> factorized_second_moment_by_overlap(const KOperator& O, const Field& phi, int N)
{
    detail::check_modes(O, phi);
    detail::require(N >= O.k(), "factorized_second_moment_by_overlap: need N >= k");
    std::vector<double> out(O.k() + 1, 0.0);
    detail::enumerate_factorized_pairs(O, phi, N, [&](int shared, double v) { out[shared] += v; });
    return out;
}

/// Leading coefficient of the product-state variance: pairs sharing exactly
/// one label number N (N-1) ... (N-2k+2), each contributing some M(i,j), so
/// sigma_N^2 = falling_factorial(N, 2k-1) * sum M(i,j) + O(N^{2k-2}).
inline double factorized_variance_leading(const KOperator& O, const Field& phi, int N)
{
    return static_cast<double>(falling_factorial(N, 2 * O.k() - 1)) * factorized_covariance(O, phi).total();
}

} // namespace mfclt
