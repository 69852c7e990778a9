#include <gtest/gtest.h>

#include <sstream>

#include "mfclt/observables.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace mfclt;

TEST(KOperator, RejectsNonHermitianAndWrongShape)
{
    CMatrix A = CMatrix::Zero(3, 3);
    A(0, 1) = 1.0;
    EXPECT_THROW(KOperator(1, 3, A), ValidationError);
    EXPECT_THROW(KOperator(2, 3, CMatrix::Identity(3, 3)), ValidationError);
}

TEST(KOperator, OperatorNormIsLargestAbsEigenvalue)
{
    CMatrix A = CMatrix::Zero(2, 2);
    A(0, 0) = 0.5;
    A(1, 1) = -2.0;
    EXPECT_DOUBLE_EQ(KOperator(1, 2, A).opnorm(), 2.0);
}

TEST(Presets, RandomHermitianIsDeterministicAndUnitNorm)
{
    const KOperator a = random_hermitian(2, 3, 42);
    const KOperator b = random_hermitian(2, 3, 42);
    EXPECT_EQ(a.matrix(), b.matrix());
    EXPECT_NEAR(a.opnorm(), 1.0, 1e-12);
    EXPECT_NE(random_hermitian(2, 3, 43).matrix(), a.matrix());
}

TEST(Presets, LcgSequenceMatchesDocumentedConstants)
{
    Lcg32 rng(1);
    EXPECT_EQ(rng.next(), 1664525u + 1013904223u);
    std::uint32_t x = 1664525u + 1013904223u;
    x = 1664525u * x + 1013904223u;
    EXPECT_EQ(rng.next(), x);
}

TEST(Presets, TensorPowerAndRankOne)
{
    const Grid g = make_grid(1, 3, 1.0);
    const KOperator A = random_hermitian(1, 3, 5);
    const KOperator A2 = tensor_power(A, 2);
    EXPECT_EQ(A2.k(), 2);
    // (A (x) A)_{(x1 x2),(y1 y2)} = A_{x1 y1} A_{x2 y2}
    EXPECT_NEAR(std::abs(A2.matrix()(1 * 3 + 2, 0 * 3 + 1) - A.matrix()(1, 0) * A.matrix()(2, 1)), 0.0, 1e-15);
    const Field f = testutil::random_field(g, 3);
    const KOperator P = rank_one(f);
    EXPECT_LT((P.matrix() * P.matrix() - P.matrix()).norm(), 1e-12);
    EXPECT_NEAR(expectation_product(P, f), 1.0, 1e-12);
}

TEST(Presets, CsvRoundTrip)
{
    const KOperator O = random_hermitian(2, 3, 9);
    std::stringstream ss;
    write_koperator_csv(ss, O);
    const KOperator back = read_koperator_csv(ss, 3);
    EXPECT_EQ(back.k(), 2);
    EXPECT_LT((back.matrix() - O.matrix()).norm(), 1e-14);
}

TEST(Presets, CsvRejectsIncompleteMatrix)
{
    std::stringstream ss("row,col,re,im\n0,0,1,0\n0,1,0,0\n1,1,1,0\n");
    EXPECT_THROW(read_koperator_csv(ss, 2), ValidationError);
}

TEST(CenterOperator, IdentityCentersToZero)
{
    const Grid g = make_grid(1, 3, 1.0);
    const Field phi = testutil::random_field(g, 1);
    for (int k : {1, 2}) EXPECT_LT(center_operator(KOperator::identity(k, 3), phi).matrix().norm(), 1e-14);
}

TEST(CenterOperator, ProjectorCentersToProjectorMinusIdentity)
{
    const Grid g = make_grid(1, 3, 1.0);
    const Field phi = testutil::random_field(g, 2);
    const KOperator P = tensor_power(rank_one(phi), 2);
    const CMatrix expect = P.matrix() - CMatrix::Identity(9, 9);
    EXPECT_LT((center_operator(P, phi).matrix() - expect).norm(), 1e-12);
}

TEST(CenterOperator, CenteredMeanVanishes)
{
    const Grid g = make_grid(1, 4, 1.0);
    for (unsigned s = 0; s < 4; ++s) {
        const Field phi = testutil::random_field(g, s);
        for (int k : {1, 2}) EXPECT_NEAR(expectation_product(center_operator(random_hermitian(k, 4, s), phi), phi), 0.0, 1e-12);
    }
}

TEST(CenterOperator, LatticeMismatchThrows)
{
    const Field phi = testutil::random_field(make_grid(1, 4, 1.0), 0);
    EXPECT_THROW(center_operator(random_hermitian(1, 3, 1), phi), ValidationError);
}

TEST(ContractH, SingleSlotIsOperatorApplication)
{
    const Grid g = make_grid(1, 4, 0.7);
    const Field phi = testutil::random_field(g, 3);
    const KOperator O = random_hermitian(1, 4, 3);
    const Field h = contract_h(O, phi, 1);
    EXPECT_LT((h.modes() - O.matrix() * phi.modes()).norm(), 1e-13);
}

TEST(ContractH, TensorPowerContraction)
{
    const Grid g = make_grid(1, 3, 1.0);
    const Field phi = testutil::random_field(g, 4);
    const KOperator A = random_hermitian(1, 3, 8);
    const KOperator AA = tensor_power(A, 2);
    const cplx mean = phi.modes().dot(A.matrix() * phi.modes());
    const CVector expect = mean * (A.matrix() * phi.modes());
    for (int j : {1, 2}) EXPECT_LT((contract_h(AA, phi, j).modes() - expect).norm(), 1e-13);
}

TEST(ContractH, IdentityGivesPhi)
{
    const Grid g = make_grid(1, 3, 0.6);
    const Field phi = testutil::random_field(g, 5);
    EXPECT_LT((contract_h(KOperator::identity(2, 3), phi, 2).values - phi.values).norm(), 1e-13);
}

TEST(ContractH, SlotOutOfRangeThrows)
{
    const Field phi = testutil::random_field(make_grid(1, 3, 1.0), 0);
    EXPECT_THROW(contract_h(random_hermitian(2, 3, 1), phi, 0), ValidationError);
    EXPECT_THROW(contract_h(random_hermitian(2, 3, 1), phi, 3), ValidationError);
}

TEST(ContractH, LinearInTheOperator)
{
    const Grid g = make_grid(1, 3, 1.0);
    const Field phi = testutil::random_field(g, 6);
    const KOperator O1 = random_hermitian(2, 3, 1), O2 = random_hermitian(2, 3, 2);
    const double a = 0.7, b = -1.9;
    const KOperator mix(2, 3, a * O1.matrix() + b * O2.matrix());
    for (int j : {1, 2}) {
        const Field lhs = contract_h(mix, phi, j);
        const Field rhs = cplx(a) * contract_h(O1, phi, j) + cplx(b) * contract_h(O2, phi, j);
        EXPECT_LT((lhs.values - rhs.values).norm(), 1e-13);
    }
}

TEST(Combinatorics, MultiIndexCount)
{
    EXPECT_EQ(multi_index_count(4, 2), 12u);
    EXPECT_EQ(multi_index_count(4, 1), 4u);
    EXPECT_EQ(multi_index_count(6, 3), oracle::multi_indices(6, 3).size());
    EXPECT_EQ(multi_index_count(6, 3), 120u);
    EXPECT_THROW(multi_index_count(2, 3), ValidationError);
}

TEST(Combinatorics, ForEachMultiIndexEnumeratesDistinctTuples)
{
    std::set<std::vector<int>> seen;
    for_each_multi_index(5, 3, [&](const std::vector<int>& idx) {
        EXPECT_NE(idx[0], idx[1]);
        EXPECT_NE(idx[1], idx[2]);
        EXPECT_NE(idx[0], idx[2]);
        seen.insert(idx);
    });
    EXPECT_EQ(seen.size(), 60u);
}

TEST(Combinatorics, MultiIndexRejectsRepeats)
{
    EXPECT_THROW(MultiIndex({1, 2, 1}), ValidationError);
    EXPECT_EQ(MultiIndex({3, 1}).size(), 2u);
}

TEST(Combinatorics, SharedPairCountExamples)
{
    EXPECT_EQ(shared_pair_count(4, 2, 0), 24u);
    EXPECT_EQ(shared_pair_count(4, 2, 2), 24u);
    EXPECT_THROW(shared_pair_count(4, 2, 3), ValidationError);
}

TEST(Combinatorics, SharedPairCountMatchesEnumeration)
{
    for (int N = 1; N <= 6; ++N)
        for (int k = 1; k <= std::min(N, 3); ++k) {
            std::uint64_t total = 0;
            for (int l = 0; l <= k; ++l) {
                EXPECT_EQ(shared_pair_count(N, k, l), static_cast<std::uint64_t>(oracle::shared_pairs(N, k, l)))
                    << "N=" << N << " k=" << k << " l=" << l;
                total += shared_pair_count(N, k, l);
            }
            EXPECT_EQ(total, multi_index_count(N, k) * multi_index_count(N, k));
            EXPECT_EQ(shared_pair_count(N, k, k), multi_index_count(N, k) * falling_factorial(k, k));
        }
}

TEST(FactorizedCovariance, EigenvectorGivesZero)
{
    const Grid g = make_grid(1, 3, 1.0);
    const Field phi = testutil::random_field(g, 2);
    EXPECT_NEAR(std::abs(factorized_covariance(rank_one(phi), phi)(1, 1)), 0.0, 1e-14);
}

TEST(FactorizedCovariance, CenteredOneBodyIsSquaredNorm)
{
    const Grid g = make_grid(1, 4, 1.0);
    const Field phi = testutil::random_field(g, 7);
    const KOperator O = center_operator(random_hermitian(1, 4, 7), phi);
    const double expect = (O.matrix() * phi.modes()).squaredNorm();
    EXPECT_NEAR(factorized_covariance(O, phi)(1, 1).real(), expect, 1e-13);
}

TEST(FactorizedCovariance, TensorPowerClosedForm)
{
    const Grid g = make_grid(1, 3, 1.0);
    const Field phi = testutil::random_field(g, 8);
    const KOperator A = random_hermitian(1, 3, 4);
    const CVector u = phi.modes();
    const CVector Au = A.matrix() * u;
    const cplx mean = u.dot(Au);
    const CVector qAu = Au - u.dot(Au) * u;
    const double expect = std::norm(mean) * qAu.squaredNorm();
    const CovarianceMatrix M = factorized_covariance(tensor_power(A, 2), phi);
    for (int i = 1; i <= 2; ++i)
        for (int j = 1; j <= 2; ++j) EXPECT_NEAR(std::abs(M(i, j) - expect), 0.0, 1e-13);
}

TEST(FactorizedCovariance, HermitianWithNonnegativeDiagonalAndCenteringInvariant)
{
    const Grid g = make_grid(1, 3, 1.0);
    const Field phi = testutil::random_field(g, 9);
    const KOperator O = random_hermitian(2, 3, 11);
    const CovarianceMatrix M = factorized_covariance(O, phi);
    EXPECT_LT((M.entries - M.entries.adjoint()).norm(), 1e-14);
    for (int i = 1; i <= 2; ++i) EXPECT_GE(M(i, i).real(), 0.0);
    const CovarianceMatrix Mc = factorized_covariance(center_operator(O, phi), phi);
    EXPECT_LT((M.entries - Mc.entries).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(FactorizedVariance, OneBodyIsLinearInN)
{
    const Grid g = make_grid(1, 4, 1.0);
    const Field phi = testutil::random_field(g, 10);
    const KOperator O = random_hermitian(1, 4, 10);
    const double m11 = factorized_covariance(O, phi)(1, 1).real();
    for (int N = 2; N <= 8; ++N) EXPECT_NEAR(factorized_variance_exact(O, phi, N), N * m11, 1e-12 * N * m11);
}

TEST(FactorizedVariance, IdentityGivesZero)
{
    const Field phi = testutil::random_field(make_grid(1, 3, 1.0), 1);
    for (int k : {1, 2}) EXPECT_NEAR(factorized_variance_exact(KOperator::identity(k, 3), phi, 2 * k + 1), 0.0, 1e-13);
}

TEST(FactorizedVariance, RejectsSmallN)
{
    const Field phi = testutil::random_field(make_grid(1, 3, 1.0), 1);
    EXPECT_THROW(factorized_variance_exact(random_hermitian(2, 3, 1), phi, 3), ValidationError);
}

TEST(FactorizedVariance, MatchesBruteForceProductState)
{
    const Grid g = make_grid(1, 3, 1.0);
    const Field phi = testutil::random_field(g, 12);
    const KOperator A = random_hermitian(1, 3, 12);
    const KOperator AA = tensor_power(A, 2);
    EXPECT_NEAR(factorized_variance_exact(AA, phi, 6), oracle::brute_force_product_variance(AA.matrix(), 2, phi.modes(), 6),
                1e-10);
    const KOperator R = random_hermitian(2, 3, 13);
    EXPECT_NEAR(factorized_variance_exact(R, phi, 5), oracle::brute_force_product_variance(R.matrix(), 2, phi.modes(), 5),
                1e-10);
    const KOperator R1 = random_hermitian(1, 3, 14);
    EXPECT_NEAR(factorized_variance_exact(R1, phi, 4), oracle::brute_force_product_variance(R1.matrix(), 1, phi.modes(), 4),
                1e-11);
}

TEST(FactorizedVariance, OverlapDecompositionSumsToVariance)
{
    const Grid g = make_grid(1, 3, 1.0);
    const Field phi = testutil::random_field(g, 15);
    const KOperator O = random_hermitian(2, 3, 15);
    const auto parts = factorized_second_moment_by_overlap(O, phi, 6);
    ASSERT_EQ(parts.size(), 3u);
    EXPECT_NEAR(parts[0], 0.0, 1e-12);
    EXPECT_NEAR(parts[0] + parts[1] + parts[2], factorized_variance_exact(O, phi, 6), 1e-11);
}

TEST(FactorizedVariance, TwoBodyScalingConverges)
{
    const testutil::DefaultSetup s;
    const KOperator O = random_hermitian(2, 4, 7);
    std::vector<double> r;
    for (int N : {4, 6, 8, 10}) r.push_back(factorized_variance_exact(O, s.phi0, N) / std::pow(N, 3));
    for (std::size_t i = 2; i < r.size(); ++i) EXPECT_LT(std::abs(r[i] - r[i - 1]), std::abs(r[i - 1] - r[i - 2]));
    const double limit = factorized_covariance(O, s.phi0).total();
    EXPECT_LT(std::abs(r.back() - limit), std::abs(r.front() - limit));
    // exact leading term: falling_factorial(N, 3) * sum M(i,j)
    EXPECT_NEAR(factorized_variance_leading(O, s.phi0, 10), 720.0 * limit, 1e-9);
}
