#pragma once

// Truncated bosonic Fock space over the lattice modes: basis, second-quantized
// operators as sparse matrices, coherent states and Weyl displacements, time
// evolution, reduced densities and exact measurement distributions.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>

#include "mfclt/bogoliubov.hpp"
#include "mfclt/distribution.hpp"
#include "mfclt/lattice.hpp"
#include "mfclt/observables.hpp"

namespace mfclt {

inline constexpr long kDefaultDimCap = 20000;
inline constexpr long kDefaultDenseCap = 6000;

/// Occupation-number basis {(n_1..n_M) : sum n <= Nmax}, ordered by total
/// number and, inside a sector, descending lexicographically.
class FockSpace {
public:
    FockSpace(int modes, int nmax, long dim_cap = kDefaultDimCap) : modes_(modes), nmax_(nmax)
    {
        detail::require(modes >= 1, "fock space: need at least one mode");
        detail::require(nmax >= 0, "fock space: Nmax must be nonnegative");
        // compositions of s into m parts, C(s+m-1, m-1); cnt(0, 0) = 1
        count_.assign(static_cast<std::size_t>(nmax + 1) * (modes + 1), 0);
        for (int s = 0; s <= nmax; ++s)
            for (int m = 0; m <= modes; ++m) count_[s * (modes + 1) + m] = compositions_raw(s, m);
        offset_.assign(nmax + 2, 0);
        for (int n = 0; n <= nmax; ++n) {
            const long add = count(n, modes);
            if (offset_[n] + add > dim_cap)
                throw CapExceeded("fock space: dimension exceeds the cap of " + std::to_string(dim_cap));
            offset_[n + 1] = offset_[n] + add;
        }
        occ_.reserve(static_cast<std::size_t>(dim()) * modes);
        std::vector<int> buf(modes);
        for (int n = 0; n <= nmax; ++n) fill_sector(buf, 0, n);
    }

    int modes() const { return modes_; }
    int nmax() const { return nmax_; }
    long dim() const { return offset_.back(); }
    long sector_begin(int n) const { return offset_[n]; }
    long sector_size(int n) const { return offset_[n + 1] - offset_[n]; }

    const int* occupation(long i) const { return occ_.data() + i * modes_; }
    int total(long i) const
    {
        const int* o = occupation(i);
        return std::accumulate(o, o + modes_, 0);
    }

    /// Basis index of an occupation vector, or -1 when it lies above the cutoff.
    long index_of(const int* occ) const
    {
        int n = 0;
        for (int m = 0; m < modes_; ++m) n += occ[m];
        if (n > nmax_) return -1;
        long rank = 0;
        int rest = n;
        for (int m = 0; m + 1 < modes_; ++m) {
            for (int w = occ[m] + 1; w <= rest; ++w) rank += count(rest - w, modes_ - m - 1);
            rest -= occ[m];
        }
        return offset_[n] + rank;
    }
    long index_of(const std::vector<int>& occ) const
    {
        detail::require(static_cast<int>(occ.size()) == modes_, "fock space: occupation length mismatch");
        return index_of(occ.data());
    }

    friend bool operator==(const FockSpace& x, const FockSpace& y)
    {
        return x.modes_ == y.modes_ && x.nmax_ == y.nmax_;
    }

private:
    static long compositions_raw(int s, int m)
    {
        if (m == 0) return s == 0 ? 1 : 0;
        return static_cast<long>(binomial(s + m - 1, m - 1));
    }
    long count(int s, int m) const { return count_[s * (modes_ + 1) + m]; }

    void fill_sector(std::vector<int>& buf, int pos, int rest)
    {
        if (pos == modes_ - 1) {
            buf[pos] = rest;
            occ_.insert(occ_.end(), buf.begin(), buf.end());
            return;
        }
        for (int v = rest; v >= 0; --v) {
            buf[pos] = v;
            fill_sector(buf, pos + 1, rest - v);
        }
    }

    int modes_;
    int nmax_;
    std::vector<long> count_;
    std::vector<long> offset_;
    std::vector<int> occ_;
};

using FockSpacePtr = std::shared_ptr<const FockSpace>;

inline FockSpacePtr build_fock_space(int modes, int nmax, long dim_cap = kDefaultDimCap)
{
    return std::make_shared<const FockSpace>(modes, nmax, dim_cap);
}

/// State vector on a truncated Fock space. `truncation_mass` is the squared
/// norm kept from an analytically known, normalized state (1 if exact).
struct FockVector {
    FockSpacePtr space;
    CVector amplitudes;
    double truncation_mass = 1.0;

    double norm_squared() const { return amplitudes.squaredNorm(); }

    /// Columns: basis_index, re, im.
    void write_csv(std::ostream& os) const
    {
        os << "basis_index,re,im\n";
        os.precision(17);
        for (long i = 0; i < amplitudes.size(); ++i)
            os << i << ',' << amplitudes[i].real() << ',' << amplitudes[i].imag() << '\n';
    }
};

inline FockVector vacuum(const FockSpacePtr& space)
{
    CVector a = CVector::Zero(space->dim());
    a[0] = 1.0;
    return FockVector{space, a, 1.0};
}

inline FockVector basis_state(const FockSpacePtr& space, long index)
{
    detail::require(index >= 0 && index < space->dim(), "basis_state: index out of range");
    CVector a = CVector::Zero(space->dim());
    a[index] = 1.0;
    return FockVector{space, a, 1.0};
}

inline cplx overlap(const FockVector& u, const FockVector& w)
{
    detail::require(u.space && w.space && *u.space == *w.space, "overlap: states live on different spaces");
    return u.amplitudes.dot(w.amplitudes);
}

// --- sparse operators -----------------------------------------------------------

using SparseMatrix = Eigen::SparseMatrix<cplx, Eigen::RowMajor>;
using Triplet = Eigen::Triplet<cplx>;

/// Sparse matrix on a Fock space; `hermitian` is checked on construction.
struct SparseHermitian {
    SparseMatrix matrix;
    bool hermitian = true;

    SparseHermitian() = default;
    SparseHermitian(long dim, const std::vector<Triplet>& triplets, bool is_hermitian = true)
        : matrix(dim, dim), hermitian(is_hermitian)
    {
        matrix.setFromTriplets(triplets.begin(), triplets.end());
        matrix.prune([](Eigen::Index, Eigen::Index, const cplx& v) { return v != cplx(0.0); });
        matrix.makeCompressed();
        if (hermitian) {
            const double defect = hermiticity_defect();
            const double scale = std::max(1.0, max_abs());
            if (defect > 1e-12 * scale) throw NumericalError("sparse operator is not Hermitian");
        }
    }
    explicit SparseHermitian(SparseMatrix m, bool is_hermitian = true) : matrix(std::move(m)), hermitian(is_hermitian)
    {
        matrix.makeCompressed();
    }

    long dim() const { return matrix.rows(); }
    CVector apply(const CVector& v) const { return matrix * v; }

    double max_abs() const
    {
        double m = 0.0;
        for (int r = 0; r < matrix.outerSize(); ++r)
            for (SparseMatrix::InnerIterator it(matrix, r); it; ++it) m = std::max(m, std::abs(it.value()));
        return m;
    }
    double hermiticity_defect() const
    {
        const SparseMatrix adj = matrix.adjoint();
        const SparseMatrix diff = matrix - adj;
        double m = 0.0;
        for (int r = 0; r < diff.outerSize(); ++r)
            for (SparseMatrix::InnerIterator it(diff, r); it; ++it) m = std::max(m, std::abs(it.value()));
        return m;
    }
    std::vector<Triplet> triplets() const
    {
        std::vector<Triplet> t;
        for (int r = 0; r < matrix.outerSize(); ++r)
            for (SparseMatrix::InnerIterator it(matrix, r); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
        return t;
    }

    SparseHermitian scaled(double s) const { return SparseHermitian(SparseMatrix(s * matrix), hermitian); }
};

namespace detail {

// Applies b_{y_1} ... b_{y_k} (rightmost first) to `occ` in place; returns
// the accumulated sqrt factor or 0 when a mode runs empty.
inline double annihilate_all(int* occ, const int* ys, int k)
{
    double amp = 1.0;
    for (int a = k - 1; a >= 0; --a) {
        const int n = occ[ys[a]];
        if (n == 0) return 0.0;
        amp *= std::sqrt(static_cast<double>(n));
        occ[ys[a]] = n - 1;
    }
    return amp;
}

inline double create_all(int* occ, const int* xs, int k)
{
    double amp = 1.0;
    for (int a = k - 1; a >= 0; --a) {
        const int n = occ[xs[a]];
        amp *= std::sqrt(static_cast<double>(n + 1));
        occ[xs[a]] = n + 1;
    }
    return amp;
}

inline void decode_tuple(long X, int M, int k, int* out)
{
    for (int a = k - 1; a >= 0; --a) {
        out[a] = static_cast<int>(X % M);
        X /= M;
    }
}

} // namespace detail

/// Second quantization of a k-body matrix:
/// sum O(x_1..x_k; y_1..y_k) a*_{x_1}..a*_{x_k} a_{y_1}..a_{y_k}.
inline SparseHermitian dGamma_k(const FockSpace& space, const KOperator& O)
{
    detail::require(O.modes() == space.modes(), "dGamma_k: operator acts on a different number of modes");
    const int M = space.modes();
    const int k = O.k();
    const long kdim = O.dim();
    const CMatrix& A = O.matrix();

    // nonzero rows per column so the inner loop only touches actual entries
    std::vector<std::vector<std::pair<long, cplx>>> col_entries(kdim);
    for (long Y = 0; Y < kdim; ++Y)
        for (long X = 0; X < kdim; ++X)
            if (A(X, Y) != cplx(0.0)) col_entries[Y].emplace_back(X, A(X, Y));

    std::vector<Triplet> trip;
    std::vector<int> work(M), work2(M), ys(k), xs(k);
    for (long i = 0; i < space.dim(); ++i) {
        const int* occ = space.occupation(i);
        if (space.total(i) < k) continue;
        for (long Y = 0; Y < kdim; ++Y) {
            if (col_entries[Y].empty()) continue;
            detail::decode_tuple(Y, M, k, ys.data());
            std::copy(occ, occ + M, work.begin());
            const double down = detail::annihilate_all(work.data(), ys.data(), k);
            if (down == 0.0) continue;
            for (const auto& [X, val] : col_entries[Y]) {
                detail::decode_tuple(X, M, k, xs.data());
                work2 = work;
                const double up = detail::create_all(work2.data(), xs.data(), k);
                const long j = space.index_of(work2.data());
                trip.emplace_back(j, i, val * (down * up));
            }
        }
    }
    return SparseHermitian(space.dim(), trip, true);
}

/// sum_{x,y} A(x,y) a*_x a_y for an M x M Hermitian matrix in the site basis.
inline SparseHermitian one_body(const FockSpace& space, const CMatrix& A)
{
    return dGamma_k(space, KOperator(1, space.modes(), A));
}

inline SparseHermitian number_operator(const FockSpace& space)
{
    std::vector<Triplet> trip;
    for (long i = 0; i < space.dim(); ++i) trip.emplace_back(i, i, static_cast<double>(space.total(i)));
    return SparseHermitian(space.dim(), trip, true);
}

namespace detail {

// c * sum_{x,y} P(x,y) a*_x a*_y plus its adjoint; creations above the cutoff are dropped.
inline void append_pairing(const FockSpace& space, const CMatrix& P, cplx c, std::vector<Triplet>& trip)
{
    const int M = space.modes();
    std::vector<int> work(M);
    for (long i = 0; i < space.dim(); ++i) {
        if (space.total(i) + 2 > space.nmax()) continue;
        const int* occ = space.occupation(i);
        for (int x = 0; x < M; ++x) {
            for (int y = 0; y < M; ++y) {
                const cplx val = c * P(x, y);
                if (val == cplx(0.0)) continue;
                std::copy(occ, occ + M, work.begin());
                const int xy[2] = {x, y};
                const double up = create_all(work.data(), xy, 2);
                const long j = space.index_of(work.data());
                trip.emplace_back(j, i, val * up);
                trip.emplace_back(i, j, std::conj(val * up));
            }
        }
    }
}

inline void append_one_body(const FockSpace& space, const CMatrix& A, std::vector<Triplet>& trip)
{
    const int M = space.modes();
    std::vector<int> work(M);
    for (long i = 0; i < space.dim(); ++i) {
        const int* occ = space.occupation(i);
        for (int y = 0; y < M; ++y) {
            if (occ[y] == 0) continue;
            for (int x = 0; x < M; ++x) {
                if (A(x, y) == cplx(0.0)) continue;
                std::copy(occ, occ + M, work.begin());
                const double amp = std::sqrt(static_cast<double>(work[y])) * std::sqrt(static_cast<double>(
                                       x == y ? work[x] : work[x] + 1));
                work[y] -= 1;
                work[x] += 1;
                trip.emplace_back(space.index_of(work.data()), i, A(x, y) * amp);
            }
        }
    }
}

} // namespace detail

/// H_N = sum T_xy a*_x a_y + (1/2N) sum_{x,y} v(x-y) a*_x a*_y a_y a_x in the
/// orthonormal site modes. The quartic term is diagonal in the occupation
/// basis: (1/2N) sum v(x-y) n_x (n_y - delta_xy).
inline SparseHermitian hamiltonian_HN(const FockSpace& space, const Grid& grid, const Potential& v, double N)
{
    detail::require(N > 0.0, "hamiltonian_HN: N must be positive");
    detail::require(grid.sites() == space.modes() && v.grid == grid, "hamiltonian_HN: lattice mismatch");
    const int M = space.modes();
    std::vector<Triplet> trip;
    detail::append_one_body(space, laplacian_matrix(grid), trip);
    for (long i = 0; i < space.dim(); ++i) {
        const int* n = space.occupation(i);
        double e = 0.0;
        for (int x = 0; x < M; ++x) {
            if (n[x] == 0) continue;
            for (int y = 0; y < M; ++y) e += v.at_displacement(x, y) * n[x] * (n[y] - (x == y ? 1 : 0));
        }
        if (e != 0.0) trip.emplace_back(i, i, e / (2.0 * N));
    }
    return SparseHermitian(space.dim(), trip, true);
}

/// dGamma(h_H + K1) + c * sum K2(x,y) a*_x a*_y + h.c., with c = `pairing_prefactor`.
inline SparseHermitian quadratic_generator(const FockSpace& space, const Field& phi, const Potential& v,
                                           KernelConvention convention = KernelConvention::exchange,
                                           double pairing_prefactor = 0.5)
{
    detail::require(phi.grid.sites() == space.modes(), "quadratic_generator: lattice mismatch");
    const Kernels K = kernels(phi, v, 0.0, convention);
    std::vector<Triplet> trip;
    detail::append_one_body(space, hartree_matrix(phi, v) + K.K1, trip);
    detail::append_pairing(space, K.K2, pairing_prefactor, trip);
    return SparseHermitian(space.dim(), trip, convention != KernelConvention::printed);
}

/// Fixed sparsity pattern of dGamma(A) + c sum P(x,y) a*_x a*_y + h.c. for
/// arbitrary M x M matrices A, P. Assembly only refills the values, which is
/// what a time-dependent generator needs at every step.
class QuadraticAssembler {
public:
    explicit QuadraticAssembler(const FockSpace& space) : dim_(space.dim()), M_(space.modes())
    {
        const int M = M_;
        std::vector<Raw> raw;
        std::vector<int> work(M);
        for (long i = 0; i < space.dim(); ++i) {
            const int* occ = space.occupation(i);
            for (int y = 0; y < M; ++y) {
                if (occ[y] == 0) continue;
                for (int x = 0; x < M; ++x) {
                    std::copy(occ, occ + M, work.begin());
                    const double amp = std::sqrt(static_cast<double>(work[y])) *
                                       std::sqrt(static_cast<double>(x == y ? work[x] : work[x] + 1));
                    work[y] -= 1;
                    work[x] += 1;
                    raw.push_back({space.index_of(work.data()), i, x * M + y, amp, false});
                }
            }
            if (space.total(i) + 2 > space.nmax()) continue;
            for (int x = 0; x < M; ++x)
                for (int y = 0; y < M; ++y) {
                    std::copy(occ, occ + M, work.begin());
                    const int xy[2] = {x, y};
                    const double amp = detail::create_all(work.data(), xy, 2);
                    const long j = space.index_of(work.data());
                    raw.push_back({j, i, M * M + x * M + y, amp, false});
                    raw.push_back({i, j, M * M + x * M + y, amp, true});
                }
        }
        std::vector<Triplet> pattern;
        pattern.reserve(raw.size());
        for (const auto& r : raw) pattern.emplace_back(r.row, r.col, cplx(1.0));
        pattern_.resize(dim_, dim_);
        pattern_.setFromTriplets(pattern.begin(), pattern.end());
        pattern_.makeCompressed();
        contributions_.reserve(raw.size());
        const auto* outer = pattern_.outerIndexPtr();
        const auto* inner = pattern_.innerIndexPtr();
        for (const auto& r : raw) {
            const auto* lo = inner + outer[r.row];
            const auto* hi = inner + outer[r.row + 1];
            const long pos = static_cast<long>(std::lower_bound(lo, hi, static_cast<int>(r.col)) - inner);
            contributions_.push_back({pos, r.coef, r.amp, r.conj});
        }
    }

    /// Requires A Hermitian for a Hermitian result; P enters with the prefactor c.
    SparseHermitian assemble(const CMatrix& A, const CMatrix& P, double c, bool hermitian = true) const
    {
        detail::require(A.rows() == M_ && A.cols() == M_ && P.rows() == M_ && P.cols() == M_,
                        "QuadraticAssembler: kernel size mismatch");
        std::vector<cplx> coef(2 * M_ * M_);
        for (int x = 0; x < M_; ++x)
            for (int y = 0; y < M_; ++y) {
                coef[x * M_ + y] = A(x, y);
                coef[M_ * M_ + x * M_ + y] = c * P(x, y);
            }
        SparseMatrix out = pattern_;
        cplx* values = out.valuePtr();
        std::fill(values, values + out.nonZeros(), cplx(0.0));
        for (const auto& e : contributions_) {
            const cplx v = e.conj ? std::conj(coef[e.coef]) : coef[e.coef];
            values[e.position] += v * e.amp;
        }
        return SparseHermitian(std::move(out), hermitian);
    }

    long dim() const { return dim_; }

private:
    struct Raw {
        long row, col;
        int coef;
        double amp;
        bool conj;
    };
    struct Contribution {
        long position;
        int coef;
        double amp;
        bool conj;
    };
    long dim_;
    int M_;
    SparseMatrix pattern_;
    std::vector<Contribution> contributions_;
};

/// The quadratic generator at the Hartree state phi, assembled on a fixed pattern.
inline SparseHermitian quadratic_generator(const QuadraticAssembler& assembler, const Field& phi, const Potential& v,
                                           KernelConvention convention = KernelConvention::exchange,
                                           double pairing_prefactor = 0.5)
{
    const Kernels K = kernels(phi, v, 0.0, convention);
    return assembler.assemble(hartree_matrix(phi, v) + K.K1, K.K2, pairing_prefactor,
                              convention != KernelConvention::printed);
}

/// a*(h) = sum_m h_m a*_m with h_m the site-mode coefficients of h.
inline SparseHermitian creation_operator(const FockSpace& space, const Field& h)
{
    detail::require(h.grid.sites() == space.modes(), "creation_operator: lattice mismatch");
    const CVector c = h.modes();
    const int M = space.modes();
    std::vector<Triplet> trip;
    std::vector<int> work(M);
    for (long i = 0; i < space.dim(); ++i) {
        if (space.total(i) + 1 > space.nmax()) continue;
        const int* occ = space.occupation(i);
        for (int m = 0; m < M; ++m) {
            if (c[m] == cplx(0.0)) continue;
            std::copy(occ, occ + M, work.begin());
            const double amp = std::sqrt(static_cast<double>(work[m] + 1));
            work[m] += 1;
            trip.emplace_back(space.index_of(work.data()), i, c[m] * amp);
        }
    }
    return SparseHermitian(space.dim(), trip, false);
}

inline SparseHermitian annihilation_operator(const FockSpace& space, const Field& h)
{
    const SparseHermitian up = creation_operator(space, h);
    return SparseHermitian(SparseMatrix(up.matrix.adjoint()), false);
}

/// phi(h) = a*(h) + a(h).
inline SparseHermitian field_operator(const FockSpace& space, const Field& h)
{
    const SparseHermitian up = creation_operator(space, h);
    SparseMatrix sum = up.matrix + SparseMatrix(up.matrix.adjoint());
    return SparseHermitian(std::move(sum), true);
}

/// a_m applied to a state vector (site mode m).
inline FockVector annihilate(const FockVector& s, int m)
{
    const FockSpace& space = *s.space;
    detail::require(m >= 0 && m < space.modes(), "annihilate: mode out of range");
    CVector out = CVector::Zero(space.dim());
    std::vector<int> work(space.modes());
    for (long i = 0; i < space.dim(); ++i) {
        const int* occ = space.occupation(i);
        if (occ[m] == 0 || s.amplitudes[i] == cplx(0.0)) continue;
        std::copy(occ, occ + space.modes(), work.begin());
        work[m] -= 1;
        out[space.index_of(work.data())] += std::sqrt(static_cast<double>(occ[m])) * s.amplitudes[i];
    }
    return FockVector{s.space, out, s.truncation_mass};
}

// --- coherent states and Weyl operators --------------------------------------------

/// z_m = sqrt(N a^d) phi(x_m); sum |z_m|^2 = N for normalized phi.
inline CVector coherent_amplitudes(const Field& phi, double N)
{
    return std::sqrt(N) * phi.modes();
}

/// W(sqrt(N) phi) Omega from the closed form
/// e^{-N/2} prod_m z_m^{n_m} / sqrt(n_m!). Truncation mass below 0.99 is an error.
inline FockVector coherent_state(const Field& phi, double N, const FockSpacePtr& space)
{
    detail::require(N > 0.0, "coherent_state: N must be positive");
    detail::require(phi.grid.sites() == space->modes(), "coherent_state: lattice mismatch");
    detail::require(std::abs(norm2(phi) - 1.0) <= 1e-8, "coherent_state: phi is not normalized");
    const CVector z = coherent_amplitudes(phi, N);
    const int M = space->modes();
    CVector amp(space->dim());
    const double pre = std::exp(-0.5 * N);
    for (long i = 0; i < space->dim(); ++i) {
        const int* occ = space->occupation(i);
        cplx a = pre;
        for (int m = 0; m < M; ++m)
            for (int j = 1; j <= occ[m]; ++j) a *= z[m] / std::sqrt(static_cast<double>(j));
        amp[i] = a;
    }
    const double mass = amp.squaredNorm();
    if (mass < 0.99)
        throw TruncationError("coherent_state: only " + std::to_string(mass) + " of the norm fits below Nmax");
    return FockVector{space, amp, mass};
}

/// True when a state's truncation mass is below 1 - 1e-6.
inline bool truncation_warning(const FockVector& s) { return s.truncation_mass < 1.0 - 1e-6; }

/// Applies W(sign * sqrt(N) phi) through its normal-ordered form
/// e^{-|z|^2/2} e^{a*(z)} e^{-a(z)}. Both series terminate on the truncated
/// space, so the result is the exact projection of the displaced state; the
/// discarded mass is subtracted from `truncation_mass`.
inline FockVector weyl_displace(const FockVector& s, const Field& phi, double N, int sign = +1)
{
    detail::require(sign == 1 || sign == -1, "weyl_displace: sign must be +1 or -1");
    detail::require(N >= 0.0, "weyl_displace: N must be nonnegative");
    const FockSpace& space = *s.space;
    detail::require(phi.grid.sites() == space.modes(), "weyl_displace: lattice mismatch");
    const Field zf = cplx(sign * std::sqrt(N)) * phi;
    const CVector z = zf.modes();
    const SparseHermitian up = creation_operator(space, zf);
    const SparseMatrix down = up.matrix.adjoint();

    CVector term = s.amplitudes;
    CVector lowered = term;
    for (int j = 1; j <= space.nmax(); ++j) {
        term = (-1.0 / j) * (down * term);
        if (term.squaredNorm() == 0.0) break;
        lowered += term;
    }
    term = lowered;
    CVector out = lowered;
    for (int j = 1; j <= space.nmax(); ++j) {
        term = (1.0 / j) * (up.matrix * term);
        if (term.squaredNorm() == 0.0) break;
        out += term;
    }
    out *= std::exp(-0.5 * z.squaredNorm());
    if (!out.allFinite()) throw NumericalError("weyl_displace: non-finite amplitudes");
    const double lost = s.norm_squared() - out.squaredNorm();
    if (lost > 1e-3) throw TruncationError("weyl_displace: " + std::to_string(lost) + " of the norm left the truncated space");
    return FockVector{s.space, out, s.truncation_mass - std::max(lost, 0.0)};
}

// --- time evolution -------------------------------------------------------------------

struct EvolveOptions {
    double tol = 1e-12;       ///< Krylov error per unit time, relative to the state norm
    int krylov_dim = 30;
    long dense_threshold = 500;
};

namespace detail {

// exp(-i tau H) v by Lanczos with full reorthogonalization. The Krylov space
// grows until the a-posteriori estimate beta_m |e_m^T exp(-i h T_m) e_1|
// meets the tolerance; if it never does, the substep h is halved.
inline CVector expmv_lanczos(const SparseMatrix& H, const CVector& v0, double tau, const EvolveOptions& opt,
                             double first_step = 0.0)
{
    CVector w = v0;
    const double total = std::abs(tau);
    if (total == 0.0 || w.squaredNorm() == 0.0) return w;
    const double direction = tau > 0 ? 1.0 : -1.0;
    double done = 0.0;
    double step = first_step > 0.0 ? std::min(first_step, total) : total;
    const long n = w.size();
    const int mmax = static_cast<int>(std::min<long>(opt.krylov_dim, n));
    CMatrix V(n, mmax + 1);
    Eigen::VectorXd alpha(mmax), beta(mmax);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;

    // small exponential exp(-i h T_m) e_1 and its error estimate
    auto small_exp = [&](int m, double h, double last_beta, CVector& c) {
        es.computeFromTridiagonal(alpha.head(m), beta.head(m - 1));
        const Eigen::VectorXd& theta = es.eigenvalues();
        const Eigen::MatrixXd& S = es.eigenvectors();
        CVector e(m);
        for (int i = 0; i < m; ++i) e[i] = std::exp(cplx(0.0, -direction * h * theta[i])) * S(0, i);
        c = S.cast<cplx>() * e;
        return last_beta * std::abs(c[m - 1]);
    };

    int guard = 0;
    while (done < total * (1.0 - 1e-15)) {
        if (++guard > 100000) throw NumericalError("expmv: too many substeps");
        const double beta0 = w.norm();
        V.col(0) = w / beta0;
        double h = std::min(step, total - done);
        const double allowed = std::max(opt.tol * h, 1e-14);
        CVector c;
        int m = 0;
        bool accepted = false;
        double last_beta = 0.0;
        for (int j = 0; j < mmax; ++j) {
            CVector u = H * V.col(j);
            alpha[j] = V.col(j).dot(u).real();
            for (int pass = 0; pass < 2; ++pass) {
                const CVector proj = V.leftCols(j + 1).adjoint() * u;
                u.noalias() -= V.leftCols(j + 1) * proj;
            }
            last_beta = u.norm();
            m = j + 1;
            if (last_beta <= 1e-13 * std::max(1.0, std::abs(alpha[j]))) {
                // invariant subspace: the projected exponential is exact
                small_exp(m, h, 0.0, c);
                accepted = true;
                break;
            }
            beta[j] = last_beta;
            V.col(j + 1) = u / last_beta;
            if (small_exp(m, h, last_beta, c) <= allowed) {
                accepted = true;
                break;
            }
        }
        bool shrunk = false;
        for (int attempt = 0; !accepted; ++attempt) {
            if (attempt > 60) throw NumericalError("expmv: Lanczos step did not converge");
            h *= 0.5;
            shrunk = true;
            accepted = small_exp(m, h, last_beta, c) <= std::max(opt.tol * h, 1e-14);
        }
        w = beta0 * (V.leftCols(m) * c);
        done += h;
        if (shrunk)
            step = h;
        else if (2 * m <= mmax)
            step = 2.0 * h;
    }
    return w;
}

} // namespace detail

/// exp(-i tau H) applied to a vector (tau may be negative).
inline CVector apply_exponential(const SparseHermitian& H, const CVector& v, double tau, const EvolveOptions& opt = {})
{
    detail::require(H.dim() == v.size(), "apply_exponential: dimension mismatch");
    if (H.dim() <= opt.dense_threshold) {
        const CMatrix dense = CMatrix(H.matrix);
        Eigen::SelfAdjointEigenSolver<CMatrix> es(dense);
        const CVector coeff = es.eigenvectors().adjoint() * v;
        CVector phased(coeff.size());
        for (long i = 0; i < coeff.size(); ++i) phased[i] = std::exp(cplx(0.0, -tau * es.eigenvalues()[i])) * coeff[i];
        return es.eigenvectors() * phased;
    }
    return detail::expmv_lanczos(H.matrix, v, tau, opt);
}

/// psi_T = exp(-i T H) psi for a time-independent generator. `dt` is the
/// first Krylov substep, later ones adapt to the error estimate; the dense
/// path below `dense_threshold` is exact in one step.
inline FockVector evolve(const FockVector& s, const SparseHermitian& H, double T, double dt, const EvolveOptions& opt = {})
{
    detail::require(dt > 0.0, "evolve: dt must be positive");
    detail::require(H.hermitian, "evolve: generator must be Hermitian");
    detail::require(H.dim() == s.space->dim(), "evolve: generator and state dimensions differ");
    if (T == 0.0) return s;
    FockVector out = s;
    if (H.dim() <= opt.dense_threshold) {
        out.amplitudes = apply_exponential(H, s.amplitudes, T, opt);
        return out;
    }
    out.amplitudes = detail::expmv_lanczos(H.matrix, out.amplitudes, T, opt, dt);
    if (!out.amplitudes.allFinite()) throw NumericalError("evolve: non-finite amplitudes");
    return out;
}

using GeneratorSource = std::function<SparseHermitian(double)>;

/// Time-dependent generator, fourth-order commutator-free Magnus steps:
/// per step, exp(-i h (a2 A1 + a1 A2)) exp(-i h (a1 A1 + a2 A2)) with A_i
/// sampled at the Gauss points t + c_i h.
inline FockVector evolve(const FockVector& s, const GeneratorSource& gen, double T, double dt, const EvolveOptions& opt = {})
{
    detail::require(dt > 0.0, "evolve: dt must be positive");
    detail::require(T >= 0.0, "evolve: T must be nonnegative");
    if (T == 0.0) return s;
    const int steps = std::max(1, static_cast<int>(std::ceil(T / dt - 1e-9)));
    const double h = T / steps;
    const double r3 = std::sqrt(3.0);
    const double c1 = 0.5 - r3 / 6.0, c2 = 0.5 + r3 / 6.0;
    const double a1 = 0.25 + r3 / 6.0, a2 = 0.25 - r3 / 6.0;
    FockVector out = s;
    for (int n = 0; n < steps; ++n) {
        const double t0 = n * h;
        const SparseHermitian A1 = gen(t0 + c1 * h);
        const SparseHermitian A2 = gen(t0 + c2 * h);
        detail::require(A1.hermitian && A2.hermitian, "evolve: generator must be Hermitian");
        detail::require(A1.dim() == s.space->dim(), "evolve: generator and state dimensions differ");
        const SparseHermitian first(SparseMatrix(a1 * A1.matrix + a2 * A2.matrix), true);
        const SparseHermitian second(SparseMatrix(a2 * A1.matrix + a1 * A2.matrix), true);
        out.amplitudes = detail::expmv_lanczos(first.matrix, out.amplitudes, h, opt);
        out.amplitudes = detail::expmv_lanczos(second.matrix, out.amplitudes, h, opt);
    }
    if (!out.amplitudes.allFinite()) throw NumericalError("evolve: non-finite amplitudes");
    return out;
}

/// <psi, exp(i tau X) psi> / ||psi||^2 by Krylov propagation.
inline cplx characteristic_function(const FockVector& s, const SparseHermitian& X, double tau, const EvolveOptions& opt = {})
{
    const CVector moved = apply_exponential(X, s.amplitudes, -tau, opt);
    return s.amplitudes.dot(moved) / s.norm_squared();
}

// --- reduced densities ----------------------------------------------------------------

/// l-particle reduced density (l = 1, 2) as an M^l x M^l matrix in the site
/// modes: gamma(X; Y) = <a*_{y_1}..a*_{y_l} a_{x_l}..a_{x_1}> divided by its trace.
inline CMatrix reduced_density(const FockVector& s, int l)
{
    detail::require(l == 1 || l == 2, "reduced_density: only l = 1 or 2 is supported");
    const int M = s.space->modes();
    std::vector<CVector> w;
    if (l == 1) {
        for (int x = 0; x < M; ++x) w.push_back(annihilate(s, x).amplitudes);
    } else {
        std::vector<FockVector> once;
        for (int x = 0; x < M; ++x) once.push_back(annihilate(s, x));
        for (int x1 = 0; x1 < M; ++x1)
            for (int x2 = 0; x2 < M; ++x2) w.push_back(annihilate(once[x1], x2).amplitudes);
    }
    const long D = static_cast<long>(w.size());
    CMatrix g(D, D);
    for (long X = 0; X < D; ++X)
        for (long Y = 0; Y < D; ++Y) g(X, Y) = w[Y].dot(w[X]);
    const double tr = g.trace().real();
    detail::require(tr > 1e-300, "reduced_density: state has no particles to reduce");
    return g / tr;
}

/// Trace norm of a Hermitian matrix difference.
inline double trace_norm(const CMatrix& A)
{
    Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (A + A.adjoint()), Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().sum();
}

// --- spectral measurement distribution ---------------------------------------------------

struct SpectralOptions {
    long dense_cap = kDefaultDenseCap;
    double merge_tol = 1e-10;
    double skip_budget = 1e-11; ///< total weight of blocks that may be dropped unexamined
};

namespace detail {

// Connected components of the sparsity graph of X.
inline std::vector<std::vector<long>> invariant_blocks(const SparseMatrix& X)
{
    const long n = X.rows();
    std::vector<long> parent(n);
    std::iota(parent.begin(), parent.end(), 0L);
    auto find = [&](long a) {
        while (parent[a] != a) {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        return a;
    };
    for (int r = 0; r < X.outerSize(); ++r)
        for (SparseMatrix::InnerIterator it(X, r); it; ++it) {
            const long a = find(it.row());
            const long b = find(it.col());
            if (a != b) parent[std::max(a, b)] = std::min(a, b);
        }
    std::vector<long> label(n, -1);
    std::vector<std::vector<long>> blocks;
    for (long i = 0; i < n; ++i) {
        const long root = find(i);
        if (label[root] < 0) {
            label[root] = static_cast<long>(blocks.size());
            blocks.emplace_back();
        }
        blocks[label[root]].push_back(i);
    }
    return blocks;
}

} // namespace detail

/// Exact distribution of the measurement of X in `s`: weights |<e_i, s>|^2
/// over the eigenvectors of X. X is split into its invariant blocks first;
/// each block is tridiagonalized and only the projected state is rotated.
inline DistributionTable spectral_distribution(const FockVector& s, const SparseHermitian& X, const SpectralOptions& opt = {})
{
    detail::require(X.hermitian, "spectral_distribution: X must be Hermitian");
    detail::require(X.dim() == s.space->dim(), "spectral_distribution: dimension mismatch");
    const auto blocks = detail::invariant_blocks(X.matrix);
    std::vector<std::pair<double, double>> atoms;
    double skipped = 0.0;
    for (const auto& block : blocks) {
        const long b = static_cast<long>(block.size());
        CVector psi(b);
        for (long i = 0; i < b; ++i) psi[i] = s.amplitudes[block[i]];
        const double weight = psi.squaredNorm();
        if (weight == 0.0) continue;
        if (b > opt.dense_cap) {
            if (skipped + weight <= opt.skip_budget) {
                skipped += weight;
                continue;
            }
            throw CapExceeded("spectral_distribution: invariant block of size " + std::to_string(b) +
                              " exceeds the dense cap " + std::to_string(opt.dense_cap));
        }
        if (b == 1) {
            atoms.emplace_back(X.matrix.coeff(block[0], block[0]).real(), weight);
            continue;
        }
        CMatrix A = CMatrix::Zero(b, b);
        std::vector<long> local(X.dim(), -1);
        for (long i = 0; i < b; ++i) local[block[i]] = i;
        for (long i = 0; i < b; ++i)
            for (SparseMatrix::InnerIterator it(X.matrix, block[i]); it; ++it) A(i, local[it.col()]) = it.value();
        Eigen::Tridiagonalization<CMatrix> tri(A);
        const CVector rotated = tri.matrixQ().adjoint() * psi;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
        es.computeFromTridiagonal(tri.diagonal(), tri.subDiagonal());
        if (es.info() != Eigen::Success) throw NumericalError("spectral_distribution: eigensolver failed");
        const CVector c = es.eigenvectors().transpose().cast<cplx>() * rotated;
        for (long i = 0; i < b; ++i) atoms.emplace_back(es.eigenvalues()[i], std::norm(c[i]));
    }
    return DistributionTable::from_atoms(std::move(atoms), opt.merge_tol);
}

} // namespace mfclt
