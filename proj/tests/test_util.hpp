#pragma once

#include <random>

#include "mfclt/lattice.hpp"

namespace testutil {

inline mfclt::Field random_field(const mfclt::Grid& g, unsigned seed, bool normalize = true)
{
    std::mt19937 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    mfclt::CVector v(g.sites());
    for (auto& x : v) x = mfclt::cplx(n(rng), n(rng));
    mfclt::Field f(g, v);
    return normalize ? mfclt::normalized(f) : f;
}

inline mfclt::CMatrix random_hermitian_matrix(long dim, unsigned seed)
{
    std::mt19937 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    mfclt::CMatrix A(dim, dim);
    for (long i = 0; i < dim; ++i)
        for (long j = 0; j < dim; ++j) A(i, j) = mfclt::cplx(n(rng), n(rng));
    return 0.5 * (A + A.adjoint());
}

/// The desk-scale defaults: d=1, L=4, a=1, Gaussian potential g=0.5, w=1
/// and a Gaussian packet with one unit of momentum.
struct DefaultSetup {
    mfclt::Grid grid = mfclt::make_grid(1, 4, 1.0);
    mfclt::Potential v = mfclt::gaussian_potential(grid, 0.5, 1.0);
    mfclt::Field phi0 = mfclt::gaussian_packet(grid, 0, 1.0, 1);
};

} // namespace testutil
