#pragma once

// Linearized fluctuation flow around the Hartree trajectory. The flow is
// integrated backwards in time on the doubled vector (f, conj f) and yields
// the limiting Gaussian variance sigma_t^2.

#include <cmath>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "mfclt/hartree.hpp"
#include "mfclt/observables.hpp"

namespace mfclt {

/// Which formula to use for the exchange kernel K1.
enum class KernelConvention {
    exchange,   ///< K1(x;y) = phi(x) v(x-y) conj(phi(y)); kernel of dGamma(K1) in the second-quantized expansion
    transposed, ///< K1(x;y) = conj(phi(x)) v(x-y) phi(y)
    printed,    ///< K1(x;y) = phi(x) v(x-y) phi(y), identical to K2; not Hermitian for complex phi
};

inline KernelConvention parse_kernel_convention(const std::string& s)
{
    if (s == "exchange") return KernelConvention::exchange;
    if (s == "transposed") return KernelConvention::transposed;
    if (s == "printed") return KernelConvention::printed;
    throw ValidationError("unknown kernel convention: " + s);
}

/// Operator matrices (orthonormal site basis) of the kernels at time s.
struct Kernels {
    CMatrix K1;
    CMatrix K2;
    double time = 0.0;
};

inline Kernels kernels(const Field& phi, const Potential& v, double time = 0.0,
                       KernelConvention convention = KernelConvention::exchange)
{
    detail::require(phi.grid == v.grid, "kernels: grid mismatch");
    const Grid& g = phi.grid;
    const int M = g.sites();
    const double w = g.cell_volume();
    Kernels K{CMatrix(M, M), CMatrix(M, M), time};
    for (int x = 0; x < M; ++x) {
        for (int y = 0; y < M; ++y) {
            const double vxy = v.at_displacement(x, y);
            const cplx px = phi.values[x];
            const cplx py = phi.values[y];
            K.K2(x, y) = w * px * vxy * py;
            switch (convention) {
            case KernelConvention::exchange: K.K1(x, y) = w * px * vxy * std::conj(py); break;
            case KernelConvention::transposed: K.K1(x, y) = w * std::conj(px) * vxy * py; break;
            case KernelConvention::printed: K.K1(x, y) = w * px * vxy * py; break;
            }
        }
    }
    return K;
}

/// Dense matrix of the Hartree Hamiltonian h_H = -Delta + v * |phi|^2.
inline CMatrix hartree_matrix(const Field& phi, const Potential& v)
{
    CMatrix h = laplacian_matrix(phi.grid);
    const RVector mf = convolve(phi.grid, v, density(phi));
    h.diagonal() += mf.cast<cplx>();
    return h;
}

/// The doubled vector (f, fbar); fbar tracks conj(f) but is integrated independently.
struct BogoPair {
    Field f;
    Field fbar;
    double time = 0.0;

    double structure_defect() const
    {
        return std::sqrt(norm2(Field(fbar.grid, fbar.values - f.values.conjugate())));
    }
};

/// f_{t;t} = (1 - |phi_t><phi_t|) contract_h(O, phi_t, j). With `project`
/// false the projection is skipped. When the projection leaves only rounding
/// noise (h parallel to phi_t) the final condition is exactly zero.
inline BogoPair final_condition(const KOperator& O, const Field& phi_t, int j, double t = 0.0, bool project = true)
{
    detail::require(j >= 1 && j <= O.k(), "final_condition: slot index out of range");
    Field h = contract_h(O, phi_t, j);
    if (project) {
        const double before = std::sqrt(norm2(h));
        h = project_out(h, phi_t);
        if (std::sqrt(norm2(h)) <= 64.0 * std::numeric_limits<double>::epsilon() * before) h = Field::zero(h.grid);
    }
    Field hbar(h.grid, h.values.conjugate());
    return BogoPair{h, hbar, t};
}

struct FlowOptions {
    KernelConvention convention = KernelConvention::exchange;
    bool project_final_condition = true;
    double dt = 0.0;             ///< 0 selects t / 2000
    bool adaptive = true;        ///< halve dt until sigma^2 changes by less than `tolerance`
    double tolerance = 1e-8;
    int max_halvings = 6;
};

namespace detail {

struct FlowGenerator {
    CMatrix A; // h_H + K1
    CMatrix K2;
};

inline FlowGenerator flow_generator(const HartreeTrajectory& traj, double s, KernelConvention convention)
{
    const Field phi = interpolate(traj, s);
    const Kernels K = kernels(phi, traj.potential, s, convention);
    return FlowGenerator{hartree_matrix(phi, traj.potential) + K.K1, K.K2};
}

// d/ds (f, fbar) = -i ( A f - K2 fbar, -conj(A) fbar + conj(K2) f )
inline void flow_rhs(const FlowGenerator& G, const CVector& f, const CVector& fb, CVector& df, CVector& dfb)
{
    const cplx mi(0.0, -1.0);
    df = mi * (G.A * f - G.K2 * fb);
    dfb = mi * (-(G.A.conjugate() * fb) + G.K2.conjugate() * f);
}

} // namespace detail

/// Integrates i d/ds f = (h_H(s) + K1_s - K2_s J) f from s = t back to s = 0
/// with classical RK4 on the doubled system; kernels are rebuilt at every stage.
/// If `max_defect` is given it receives the largest ||fbar - conj f|| seen
/// at any step, including the final condition.
inline BogoPair evolve_backward(const BogoPair& final, const HartreeTrajectory& traj, double t, double dt,
                                KernelConvention convention = KernelConvention::exchange,
                                double* max_defect = nullptr)
{
    if (max_defect) *max_defect = final.structure_defect();
    detail::require(std::abs(final.time - t) <= 1e-12 * std::max(1.0, t), "evolve_backward: final condition time mismatch");
    detail::require(t >= 0.0 && t <= traj.end_time() * (1.0 + 1e-12), "evolve_backward: t outside the Hartree trajectory");
    detail::require(final.f.grid == traj.grid, "evolve_backward: grid mismatch");
    if (t == 0.0) return final;
    detail::require(dt > 0.0, "evolve_backward: dt must be positive");

    const int steps = static_cast<int>(std::ceil(t / dt - 1e-9));
    const double h = -t / steps;
    CVector f = final.f.values;
    CVector fb = final.fbar.values;
    const int M = static_cast<int>(f.size());
    CVector k1(M), k1b(M), k2(M), k2b(M), k3(M), k3b(M), k4(M), k4b(M);

    detail::FlowGenerator g_start = detail::flow_generator(traj, t, convention);
    for (int n = 0; n < steps; ++n) {
        const double s = t + n * h;
        const double s_end = (n + 1 == steps) ? 0.0 : s + h;
        const detail::FlowGenerator g_mid = detail::flow_generator(traj, s + 0.5 * h, convention);
        detail::FlowGenerator g_end = detail::flow_generator(traj, s_end, convention);

        detail::flow_rhs(g_start, f, fb, k1, k1b);
        detail::flow_rhs(g_mid, f + 0.5 * h * k1, fb + 0.5 * h * k1b, k2, k2b);
        detail::flow_rhs(g_mid, f + 0.5 * h * k2, fb + 0.5 * h * k2b, k3, k3b);
        detail::flow_rhs(g_end, f + h * k3, fb + h * k3b, k4, k4b);
        f += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        fb += (h / 6.0) * (k1b + 2.0 * k2b + 2.0 * k3b + k4b);
        if (!f.allFinite() || !fb.allFinite()) throw NumericalError("evolve_backward: non-finite value in the flow");
        if (max_defect) *max_defect = std::max(*max_defect, (fb - f.conjugate()).norm() * std::sqrt(traj.grid.cell_volume()));
        g_start = std::move(g_end);
    }
    return BogoPair{Field(final.f.grid, f), Field(final.fbar.grid, fb), 0.0};
}

struct VarianceResult {
    double sigma_sq = 0.0;
    std::vector<BogoPair> flows; // f^{(j)}_{0;t}, j = 1..k
    double dt_used = 0.0;
    double max_structure_defect = 0.0;
};

namespace detail {

inline VarianceResult variance_fixed_dt(const KOperator& O, const HartreeTrajectory& traj, double t, double dt,
                                        const FlowOptions& opt)
{
    const Field phi_t = interpolate(traj, t);
    VarianceResult r;
    r.dt_used = dt;
    Field sum = Field::zero(traj.grid);
    for (int j = 1; j <= O.k(); ++j) {
        BogoPair fin = final_condition(O, phi_t, j, t, opt.project_final_condition);
        double defect = 0.0;
        BogoPair out = evolve_backward(fin, traj, t, dt, opt.convention, &defect);
        r.max_structure_defect = std::max(r.max_structure_defect, defect);
        sum += out.f;
        r.flows.push_back(std::move(out));
    }
    r.sigma_sq = norm2(sum);
    return r;
}

} // namespace detail

/// sigma_t^2 = || sum_j f^{(j)}_{0;t} ||^2.
inline VarianceResult variance_detail(const KOperator& O, const HartreeTrajectory& traj, double t,
                                      const FlowOptions& opt = {})
{
    detail::require(O.modes() == traj.grid.sites(), "variance: operator and trajectory live on different lattices");
    if (t == 0.0) return detail::variance_fixed_dt(O, traj, 0.0, 1.0, opt);
    double dt = opt.dt > 0.0 ? opt.dt : t / 2000.0;
    VarianceResult prev = detail::variance_fixed_dt(O, traj, t, dt, opt);
    if (!opt.adaptive) return prev;
    for (int i = 0; i < opt.max_halvings; ++i) {
        dt *= 0.5;
        VarianceResult next = detail::variance_fixed_dt(O, traj, t, dt, opt);
        const bool done = std::abs(next.sigma_sq - prev.sigma_sq) < opt.tolerance;
        prev = std::move(next);
        if (done) return prev;
    }
    throw NumericalError("variance: flow did not converge under step halving");
}

inline double variance(const KOperator& O, const HartreeTrajectory& traj, double t, const FlowOptions& opt = {})
{
    return variance_detail(O, traj, t, opt).sigma_sq;
}

/// Columns: t, sigma_sq, k, observable_id.
inline void write_variance_csv(std::ostream& os, const std::vector<double>& times, const std::vector<double>& sigma_sq,
                               int k, const std::string& observable_id, bool header = true)
{
    if (header) os << "t,sigma_sq,k,observable_id\n";
    os.precision(17);
    for (std::size_t i = 0; i < times.size(); ++i)
        os << times[i] << ',' << sigma_sq[i] << ',' << k << ',' << observable_id << '\n';
}

} // namespace mfclt
