#pragma once

// Time-dependent Hartree equation i d/dt phi = (-Delta + v * |phi|^2) phi on
// the lattice, solved by split-step Fourier with stored checkpoints.

#include <algorithm>
#include <cmath>
#include <ostream>
#include <vector>

#include "mfclt/lattice.hpp"

namespace mfclt {

/// h_H phi = -Delta phi + (v * |phi|^2) phi.
inline Field hartree_rhs(const Field& phi, const Potential& v)
{
    detail::require(phi.grid == v.grid, "hartree_rhs: grid mismatch");
    const RVector mean_field = convolve(phi.grid, v, density(phi));
    Field out = laplacian_apply(phi.grid, phi);
    out.values += (mean_field.array() * phi.values.array()).matrix();
    return out;
}

/// E[phi] = <phi, -Delta phi> + 1/2 a^d sum_x (v * |phi|^2)(x) |phi(x)|^2.
inline double hartree_energy(const Field& phi, const Potential& v)
{
    const RVector rho = density(phi);
    const RVector vr = convolve(phi.grid, v, rho);
    const double kinetic = inner(phi, laplacian_apply(phi.grid, phi)).real();
    return kinetic + 0.5 * phi.grid.cell_volume() * vr.dot(rho);
}

enum class SplitScheme {
    strang,   ///< half kinetic, full potential, half kinetic
    yoshida4, ///< triple-jump composition of Strang steps (fourth order)
};

struct HartreeTrajectory {
    Grid grid;
    Potential potential;
    std::vector<double> times;
    std::vector<Field> states;
    std::vector<Field> derivatives; // d/dt phi = -i h_H phi at each stored time
    double dt_store = 0.0;
    double dt_step = 0.0;

    double end_time() const { return times.back(); }
};

namespace detail {

inline void strang_step(const Grid& g, const Potential& v, CVector& hat_work, Field& phi, double dt)
{
    const int M = g.sites();
    hat_work = dft_forward(g, phi.values);
    for (int k = 0; k < M; ++k) hat_work[k] *= std::exp(cplx(0.0, -0.5 * dt * g.momentum_squared(k)));
    phi.values = dft_inverse(g, hat_work);

    // |phi| is invariant under the potential flow, so this sub-step is exact.
    const RVector vr = convolve(g, v, density(phi));
    for (int x = 0; x < M; ++x) phi.values[x] *= std::exp(cplx(0.0, -dt * vr[x]));

    hat_work = dft_forward(g, phi.values);
    for (int k = 0; k < M; ++k) hat_work[k] *= std::exp(cplx(0.0, -0.5 * dt * g.momentum_squared(k)));
    phi.values = dft_inverse(g, hat_work);
}

inline void split_step(const Grid& g, const Potential& v, CVector& work, Field& phi, double dt, SplitScheme scheme)
{
    if (scheme == SplitScheme::strang) {
        strang_step(g, v, work, phi, dt);
        return;
    }
    const double cbrt2 = std::cbrt(2.0);
    const double w1 = 1.0 / (2.0 - cbrt2);
    const double w0 = -cbrt2 / (2.0 - cbrt2);
    strang_step(g, v, work, phi, w1 * dt);
    strang_step(g, v, work, phi, w0 * dt);
    strang_step(g, v, work, phi, w1 * dt);
}

inline Field time_derivative(const Field& phi, const Potential& v)
{
    Field d = hartree_rhs(phi, v);
    d.values *= cplx(0.0, -1.0);
    return d;
}

} // namespace detail

/// Evolves phi0 to time T, storing the state every dt_store. The effective
/// step divides the storage interval exactly and never exceeds dt.
inline HartreeTrajectory evolve_hartree(const Field& phi0, const Potential& v, double T, double dt, double dt_store,
                                        SplitScheme scheme = SplitScheme::strang)
{
    detail::require(phi0.grid == v.grid, "evolve_hartree: grid mismatch");
    detail::require(std::abs(norm2(phi0) - 1.0) <= 1e-8, "evolve_hartree: initial state is not normalized");
    detail::require(dt > 0.0, "evolve_hartree: dt must be positive");
    detail::require(T >= 0.0, "evolve_hartree: T must be nonnegative");

    const Grid& g = phi0.grid;
    HartreeTrajectory traj{g, v, {}, {}, {}, 0.0, 0.0};
    traj.times.push_back(0.0);
    traj.states.push_back(phi0);
    traj.derivatives.push_back(detail::time_derivative(phi0, v));
    if (T == 0.0) return traj;

    detail::require(dt_store >= dt && dt_store <= T * (1.0 + 1e-12), "evolve_hartree: need dt <= dt_store <= T");
    const int n_store = static_cast<int>(std::ceil(T / dt_store - 1e-9));
    const double h_store = T / n_store;
    const int substeps = static_cast<int>(std::ceil(h_store / dt - 1e-9));
    const double step = h_store / substeps;
    traj.dt_store = h_store;
    traj.dt_step = step;

    Field phi = phi0;
    CVector work(g.sites());
    for (int i = 1; i <= n_store; ++i) {
        for (int s = 0; s < substeps; ++s) detail::split_step(g, v, work, phi, step, scheme);
        if (!phi.values.allFinite()) throw NumericalError("evolve_hartree: non-finite state");
        traj.times.push_back(i * h_store);
        traj.states.push_back(phi);
        traj.derivatives.push_back(detail::time_derivative(phi, v));
    }
    return traj;
}

/// phi_s between checkpoints: cubic Hermite interpolation using the exact
/// time derivatives at the checkpoints. The result is always renormalized,
/// also at the checkpoints themselves.
inline Field interpolate(const HartreeTrajectory& traj, double s)
{
    const double T = traj.end_time();
    const double slack = 1e-12 * std::max(1.0, T);
    detail::require(s >= -slack && s <= T + slack, "interpolate: time outside the trajectory");
    s = std::clamp(s, 0.0, T);
    if (traj.times.size() == 1) return normalized(traj.states.front());

    const double h = traj.dt_store;
    std::size_t i = static_cast<std::size_t>(std::floor(s / h));
    i = std::min(i, traj.times.size() - 2);
    const double u = (s - traj.times[i]) / h;
    if (std::abs(u) < 1e-13) return normalized(traj.states[i]);
    if (std::abs(u - 1.0) < 1e-13) return normalized(traj.states[i + 1]);

    const double u2 = u * u;
    const double u3 = u2 * u;
    const double h00 = 2 * u3 - 3 * u2 + 1;
    const double h10 = u3 - 2 * u2 + u;
    const double h01 = -2 * u3 + 3 * u2;
    const double h11 = u3 - u2;
    CVector v = h00 * traj.states[i].values + (h10 * h) * traj.derivatives[i].values +
                h01 * traj.states[i + 1].values + (h11 * h) * traj.derivatives[i + 1].values;
    return normalized(Field(traj.grid, std::move(v)));
}

/// Columns: time, site, re, im.
inline void write_trajectory_csv(std::ostream& os, const HartreeTrajectory& traj)
{
    os << "time,site,re,im\n";
    os.precision(17);
    for (std::size_t i = 0; i < traj.times.size(); ++i)
        for (int x = 0; x < traj.grid.sites(); ++x)
            os << traj.times[i] << ',' << x << ',' << traj.states[i].values[x].real() << ','
               << traj.states[i].values[x].imag() << '\n';
}

} // namespace mfclt
