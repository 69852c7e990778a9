#include <gtest/gtest.h>

#include <sstream>

#include "mfclt/bogoliubov.hpp"
#include "test_util.hpp"

using namespace mfclt;

namespace {

struct Flow {
    testutil::DefaultSetup s;
    HartreeTrajectory traj = evolve_hartree(s.phi0, s.v, 1.0, 1e-3, 1.0 / 200);
};

double defect_of(const BogoPair& p) { return p.structure_defect(); }

} // namespace

TEST(Kernels, RealPhiGivesEqualKernels)
{
    const testutil::DefaultSetup s;
    const Field real_phi = normalized(Field(s.grid, s.phi0.values.cwiseAbs().cast<cplx>()));
    const Kernels K = kernels(real_phi, s.v);
    EXPECT_LT((K.K1 - K.K2).norm(), 1e-15);
}

TEST(Kernels, ZeroPotentialGivesZeroKernels)
{
    const testutil::DefaultSetup s;
    const Kernels K = kernels(s.phi0, constant_potential(s.grid, 0.0));
    EXPECT_EQ(K.K1.norm(), 0.0);
    EXPECT_EQ(K.K2.norm(), 0.0);
}

TEST(Kernels, PlaneWaveWithConstantPotential)
{
    const Grid g = make_grid(1, 5, 0.5);
    const double c = 1.3;
    const Field w = plane_wave(g, 2);
    const double p = g.momentum(2)[0];
    const Kernels K = kernels(w, constant_potential(g, c));
    const int M = g.sites();
    for (int x = 0; x < M; ++x)
        for (int y = 0; y < M; ++y) {
            const double xs = x * g.a, ys = y * g.a;
            // exchange convention: phi(x) v conj(phi(y)); plane-wave amplitude squared is 1/(M a)
            const cplx k1 = c * std::exp(cplx(0, p * (xs - ys))) / double(M);
            const cplx k2 = c * std::exp(cplx(0, p * (xs + ys))) / double(M);
            EXPECT_NEAR(std::abs(K.K1(x, y) - k1), 0.0, 1e-14);
            EXPECT_NEAR(std::abs(K.K2(x, y) - k2), 0.0, 1e-14);
        }
}

TEST(Kernels, HermitianAndSymmetric)
{
    const testutil::DefaultSetup s;
    const Field phi = testutil::random_field(s.grid, 3);
    for (auto conv : {KernelConvention::exchange, KernelConvention::transposed}) {
        const Kernels K = kernels(phi, s.v, 0.0, conv);
        EXPECT_LT((K.K1 - K.K1.adjoint()).norm(), 1e-12);
        EXPECT_LT((K.K2 - K.K2.transpose()).norm(), 1e-12);
    }
    const Kernels P = kernels(phi, s.v, 0.0, KernelConvention::printed);
    EXPECT_GT((P.K1 - P.K1.adjoint()).norm(), 1e-3);
}

TEST(Kernels, ConventionParsing)
{
    EXPECT_EQ(parse_kernel_convention("exchange"), KernelConvention::exchange);
    EXPECT_EQ(parse_kernel_convention("transposed"), KernelConvention::transposed);
    EXPECT_EQ(parse_kernel_convention("printed"), KernelConvention::printed);
    EXPECT_THROW(parse_kernel_convention("other"), ValidationError);
}

TEST(FinalCondition, ProjectorOfPhiGivesZero)
{
    const testutil::DefaultSetup s;
    const BogoPair f = final_condition(rank_one(s.phi0), s.phi0, 1);
    EXPECT_LT(f.f.values.norm(), 1e-14);
}

TEST(FinalCondition, OrthogonalImageIsUnchanged)
{
    const testutil::DefaultSetup s;
    // O = |phi><chi| + |chi><phi| with chi orthogonal to phi maps phi to chi
    const Field chi = normalized(project_out(testutil::random_field(s.grid, 4), s.phi0));
    const CVector u = s.phi0.modes(), w = chi.modes();
    const KOperator O(1, 4, u * w.adjoint() + w * u.adjoint());
    const BogoPair f = final_condition(O, s.phi0, 1);
    EXPECT_LT((f.f.values - chi.values).norm(), 1e-13);
    EXPECT_LT((f.fbar.values - chi.values.conjugate()).norm(), 1e-13);
}

TEST(FinalCondition, TensorPowerBothSlots)
{
    const testutil::DefaultSetup s;
    const KOperator A = random_hermitian(1, 4, 2);
    const CVector u = s.phi0.modes();
    const CVector Au = A.matrix() * u;
    const CVector expect = u.dot(Au) * (Au - u.dot(Au) * u);
    for (int j : {1, 2}) EXPECT_LT((final_condition(tensor_power(A, 2), s.phi0, j).f.modes() - expect).norm(), 1e-13);
    EXPECT_THROW(final_condition(A, s.phi0, 2), ValidationError);
}

TEST(EvolveBackward, FreeFlowPlaneWave)
{
    const Grid g = make_grid(1, 4, 1.0);
    const Potential zero = constant_potential(g, 0.0);
    const Field phi0 = gaussian_packet(g, 0, 1.0, 1);
    const auto traj = evolve_hartree(phi0, zero, 1.0, 1e-3, 1.0 / 200);
    const Field w = plane_wave(g, 1);
    const BogoPair fin{w, Field(g, w.values.conjugate()), 1.0};
    const BogoPair out = evolve_backward(fin, traj, 1.0, 1e-3);
    const Field expect = std::exp(cplx(0, g.momentum_squared(1) * 1.0)) * w;
    EXPECT_LT((out.f.values - expect.values).norm(), 1e-7);
}

TEST(EvolveBackward, ZeroTimeIsIdentity)
{
    const Flow fl;
    const BogoPair fin = final_condition(random_hermitian(1, 4, 1), fl.s.phi0, 1, 0.0);
    const BogoPair out = evolve_backward(fin, fl.traj, 0.0, 1e-3);
    EXPECT_EQ(out.f.values, fin.f.values);
}

TEST(EvolveBackward, TimeMismatchThrows)
{
    const Flow fl;
    const BogoPair fin = final_condition(random_hermitian(1, 4, 1), fl.s.phi0, 1, 0.5);
    EXPECT_THROW(evolve_backward(fin, fl.traj, 0.7, 1e-3), ValidationError);
    EXPECT_THROW(evolve_backward(fin, fl.traj, 0.5, 0.0), ValidationError);
}

TEST(EvolveBackward, PreservesStructureAlongThePath)
{
    const Flow fl;
    const Field phi_t = interpolate(fl.traj, 1.0);
    for (int k : {1, 2}) {
        const KOperator O = random_hermitian(k, 4, 7);
        for (int j = 1; j <= k; ++j) {
            double worst = -1.0;
            const BogoPair out = evolve_backward(final_condition(O, phi_t, j, 1.0), fl.traj, 1.0, 5e-4,
                                                 KernelConvention::exchange, &worst);
            EXPECT_LE(worst, 1e-8);
            EXPECT_GE(worst, 0.0);
            EXPECT_LE(defect_of(out), 1e-8);
        }
    }
}

TEST(EvolveBackward, LinearInTheFinalCondition)
{
    const Flow fl;
    const Field phi_t = interpolate(fl.traj, 1.0);
    const BogoPair f1 = final_condition(random_hermitian(1, 4, 7), phi_t, 1, 1.0);
    const BogoPair f2 = final_condition(random_hermitian(2, 4, 7), phi_t, 2, 1.0);
    const BogoPair a = evolve_backward(f1, fl.traj, 1.0, 1e-3);
    const BogoPair b = evolve_backward(f2, fl.traj, 1.0, 1e-3);
    // real combinations keep fbar = conj f
    const BogoPair mix{0.3 * f1.f + (-1.7) * f2.f, 0.3 * f1.fbar + (-1.7) * f2.fbar, 1.0};
    const BogoPair m = evolve_backward(mix, fl.traj, 1.0, 1e-3);
    EXPECT_LT((m.f.values - (0.3 * a.f.values - 1.7 * b.f.values)).norm(), 1e-10);
    // on the doubled system the map is complex linear
    const cplx alpha(0.3, -1.7);
    const BogoPair scaled{alpha * f1.f, alpha * f1.fbar, 1.0};
    const BogoPair s = evolve_backward(scaled, fl.traj, 1.0, 1e-3);
    EXPECT_LT((s.f.values - alpha * a.f.values).norm(), 1e-10);
    EXPECT_LT((s.fbar.values - alpha * a.fbar.values).norm(), 1e-10);
}

TEST(EvolveBackward, FourthOrderUnderStepHalving)
{
    const Flow fl;
    const Field phi_t = interpolate(fl.traj, 1.0);
    const BogoPair fin = final_condition(random_hermitian(1, 4, 7), phi_t, 1, 1.0);
    const CVector f1 = evolve_backward(fin, fl.traj, 1.0, 0.2).f.values;
    const CVector f2 = evolve_backward(fin, fl.traj, 1.0, 0.1).f.values;
    const CVector f3 = evolve_backward(fin, fl.traj, 1.0, 0.05).f.values;
    EXPECT_GE((f1 - f2).norm() / (f2 - f3).norm(), 8.0);
}

TEST(Variance, EqualsCovarianceSumAtTimeZero)
{
    const Flow fl;
    for (int k : {1, 2}) {
        const KOperator O = random_hermitian(k, 4, 7);
        EXPECT_NEAR(variance(O, fl.traj, 0.0), factorized_covariance(O, fl.s.phi0).total(), 1e-10);
    }
}

TEST(Variance, IdentityHasNoFluctuations)
{
    const Flow fl;
    for (int k : {1, 2})
        for (double t : {0.0, 0.5, 1.0}) EXPECT_NEAR(variance(KOperator::identity(k, 4), fl.traj, t), 0.0, 1e-20);
}

TEST(Variance, FreeClosedForm)
{
    const Grid g = make_grid(1, 4, 1.0);
    const Potential zero = constant_potential(g, 0.0);
    const Field phi0 = gaussian_packet(g, 0, 1.0, 1);
    const auto traj = evolve_hartree(phi0, zero, 1.0, 1e-3, 1.0 / 200);
    const KOperator O = random_hermitian(1, 4, 7);
    for (double t : {0.5, 1.0}) {
        // U* O U phi0 with U = exp(i Delta t), then project away from phi0
        const Field moved = free_propagate(g, phi0, t);
        const Field Omoved = Field::from_modes(g, O.matrix() * moved.modes());
        const Field back = free_propagate(g, Omoved, -t);
        const double expect = norm2(project_out(back, phi0));
        EXPECT_NEAR(variance(O, traj, t), expect, 1e-8);
    }
}

TEST(Variance, NonnegativeFiniteAndContinuousAtZero)
{
    const Flow fl;
    for (int k : {1, 2}) {
        const KOperator O = random_hermitian(k, 4, 7);
        const double s0 = variance(O, fl.traj, 0.0);
        const double s_small = variance(O, fl.traj, 0.01);
        EXPECT_LE(std::abs(s_small - s0), 0.05 * s0 + 1e-9);
        for (double t : {0.25, 0.75, 1.0}) {
            const double v = variance(O, fl.traj, t);
            EXPECT_TRUE(std::isfinite(v));
            EXPECT_GE(v, 0.0);
        }
    }
}

TEST(Variance, AdaptiveStepReportsItsStep)
{
    const Flow fl;
    const VarianceResult r = variance_detail(random_hermitian(1, 4, 7), fl.traj, 1.0);
    EXPECT_GT(r.dt_used, 0.0);
    EXPECT_LE(r.dt_used, 1.0 / 2000);
    EXPECT_EQ(r.flows.size(), 1u);
    EXPECT_LE(r.max_structure_defect, 1e-8);
}

TEST(Variance, ProjectionFlagKeepsTheTimeZeroIdentity)
{
    const Flow fl;
    // without the projection the time-zero value counts the phi component too
    FlowOptions plain;
    plain.project_final_condition = false;
    const KOperator O = random_hermitian(1, 4, 7);
    const double projected = variance(O, fl.traj, 0.0);
    const double unprojected = variance(O, fl.traj, 0.0, plain);
    const double mean = expectation_product(O, fl.s.phi0);
    EXPECT_NEAR(unprojected, projected + mean * mean, 1e-12);
    // the centered operator removes the difference entirely
    const KOperator Oc = center_operator(O, fl.s.phi0);
    EXPECT_NEAR(variance(Oc, fl.traj, 0.0, plain), projected, 1e-12);
}

TEST(Variance, CsvColumns)
{
    std::ostringstream os;
    write_variance_csv(os, {0.0, 0.5}, {0.3, 0.35}, 1, "id");
    EXPECT_EQ(os.str(), "t,sigma_sq,k,observable_id\n0,0.29999999999999999,1,id\n0.5,0.34999999999999998,1,id\n");
}
