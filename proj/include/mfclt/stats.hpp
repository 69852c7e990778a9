#pragma once

// Comparison of exact measurement distributions with the Gaussian limit law:
// CDFs, Kolmogorov distance, interval probabilities, characteristic
// functions, Chebyshev tails and the mollified-indicator bracketing.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <ostream>
#include <vector>

#include <Eigen/Eigenvalues>

#include "mfclt/distribution.hpp"
#include "mfclt/error.hpp"

namespace mfclt {

/// Centered normal law; variance 0 is the point mass at the origin.
struct GaussianLaw {
    double variance = 0.0;

    explicit GaussianLaw(double var = 0.0) : variance(var)
    {
        detail::require(std::isfinite(var) && var >= 0.0, "GaussianLaw: variance must be finite and nonnegative");
    }
    bool degenerate() const { return variance == 0.0; }

    double cdf(double x) const
    {
        if (degenerate()) return x >= 0.0 ? 1.0 : 0.0;
        return 0.5 * std::erfc(-x / std::sqrt(2.0 * variance));
    }
    double cdf_left(double x) const
    {
        if (degenerate()) return x > 0.0 ? 1.0 : 0.0;
        return cdf(x);
    }
    double density(double x) const
    {
        detail::require(!degenerate(), "GaussianLaw: point mass has no density");
        return std::exp(-0.5 * x * x / variance) / std::sqrt(2.0 * std::numbers::pi * variance);
    }
    /// P[a <= G <= b].
    double interval(double a, double b) const { return cdf(b) - cdf_left(a); }
    double char_fn(double tau) const { return std::exp(-0.5 * tau * tau * variance); }
};

/// Right-continuous CDF of the normalized table.
inline double cdf(const DistributionTable& t, double x)
{
    detail::require(!t.empty(), "cdf: empty table");
    double s = 0.0;
    for (std::size_t i = 0; i < t.size() && t.eigenvalues()[i] <= x; ++i) s += t.weights()[i];
    return s / t.total();
}

/// Left limit F(x-).
inline double cdf_left(const DistributionTable& t, double x)
{
    detail::require(!t.empty(), "cdf: empty table");
    double s = 0.0;
    for (std::size_t i = 0; i < t.size() && t.eigenvalues()[i] < x; ++i) s += t.weights()[i];
    return s / t.total();
}

/// sup_x |F(x) - Phi(x)|. Both CDFs are monotone step/continuous functions,
/// so the supremum is attained at a jump of either one, from the left or the right.
inline double kolmogorov_distance(const DistributionTable& t, const GaussianLaw& law)
{
    detail::require(!t.empty(), "kolmogorov_distance: empty table");
    std::vector<double> points = t.eigenvalues();
    if (law.degenerate()) points.push_back(0.0);
    double d = 0.0;
    for (double x : points) {
        d = std::max(d, std::abs(cdf(t, x) - law.cdf(x)));
        d = std::max(d, std::abs(cdf_left(t, x) - law.cdf_left(x)));
    }
    return std::min(d, 1.0);
}

/// Normalized weight of the atoms inside [a, b].
inline double interval_prob(const DistributionTable& t, double a, double b)
{
    detail::require(a <= b, "interval_prob: need a <= b");
    detail::require(!t.empty(), "interval_prob: empty table");
    double s = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i)
        if (t.eigenvalues()[i] >= a && t.eigenvalues()[i] <= b) s += t.weights()[i];
    return s / t.total();
}

inline std::complex<double> char_fn(const DistributionTable& t, double tau)
{
    detail::require(!t.empty(), "char_fn: empty table");
    std::complex<double> s = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) s += t.weights()[i] * std::exp(std::complex<double>(0.0, tau * t.eigenvalues()[i]));
    return s / t.total();
}

inline std::vector<double> char_fn_gap(const DistributionTable& t, double sigma_sq, const std::vector<double>& taus)
{
    const GaussianLaw law(sigma_sq);
    std::vector<double> out;
    out.reserve(taus.size());
    for (double tau : taus) out.push_back(std::abs(char_fn(t, tau) - law.char_fn(tau)));
    return out;
}

/// Chebyshev tail bound E[S^2] / (binom^2 delta^2).
inline double chebyshev_bound(double second_moment, double binom_Nk, double delta)
{
    detail::require(delta > 0.0, "chebyshev_bound: delta must be positive");
    detail::require(binom_Nk > 0.0, "chebyshev_bound: normalization must be positive");
    return second_moment / (binom_Nk * binom_Nk * delta * delta);
}

/// Normalized tail mass P[|X| > delta].
inline double tail_probability(const DistributionTable& t, double delta)
{
    detail::require(!t.empty(), "tail_probability: empty table");
    double s = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i)
        if (std::abs(t.eigenvalues()[i]) > delta) s += t.weights()[i];
    return s / t.total();
}

// --- quadrature -------------------------------------------------------------------

/// Gauss-Legendre nodes and weights on [-1, 1] (Golub-Welsch).
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n)
{
    detail::require(n >= 1, "gauss_legendre: need at least one node");
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd sub(std::max(n - 1, 0));
    for (int i = 1; i < n; ++i) sub[i - 1] = i / std::sqrt(4.0 * i * i - 1.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, sub);
    std::vector<double> x(n), w(n);
    for (int i = 0; i < n; ++i) {
        x[i] = es.eigenvalues()[i];
        w[i] = 2.0 * es.eigenvectors()(0, i) * es.eigenvectors()(0, i);
    }
    return {x, w};
}

/// Composite Gauss-Legendre of f over [lo, hi] with `panels` equal panels.
template <typename F>
double integrate(F&& f, double lo, double hi, int panels, int order = 10)
{
    if (hi <= lo) return 0.0;
    static thread_local std::pair<std::vector<double>, std::vector<double>> rule;
    if (static_cast<int>(rule.first.size()) != order) rule = gauss_legendre(order);
    const double h = (hi - lo) / panels;
    double s = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double mid = lo + (p + 0.5) * h;
        for (int i = 0; i < order; ++i) s += rule.second[i] * f(mid + 0.5 * h * rule.first[i]);
    }
    return 0.5 * h * s;
}

// --- mollified indicators -------------------------------------------------------------

/// Smooth lower and upper approximations of the indicator of [a, b]:
/// f_minus = chi_[a+eps, b-eps] * eta_eps and f_plus = chi_[a-eps, b+eps] * eta_eps,
/// with the bump eta(s) = (315/256)(1 - s^2)^4 on [-1, 1], so f_minus <= chi <= f_plus.
class MollifiedIndicator {
public:
    MollifiedIndicator(double a, double b, double eps) : a_(a), b_(b), eps_(eps)
    {
        detail::require(eps > 0.0, "mollified_indicator: eps must be positive");
        detail::require(b - a > 2.0 * eps, "mollified_indicator: need b - a > 2 eps");
    }

    double a() const { return a_; }
    double b() const { return b_; }
    double eps() const { return eps_; }

    /// Cumulative bump integral H(s) = int_{-1}^{s} eta.
    static double bump_cdf(double s)
    {
        if (s <= -1.0) return 0.0;
        if (s >= 1.0) return 1.0;
        const double s2 = s * s;
        const double poly = s * (1.0 + s2 * (-4.0 / 3.0 + s2 * (6.0 / 5.0 + s2 * (-4.0 / 7.0 + s2 / 9.0))));
        // the polynomial misses 0 and 1 at the ends by a rounding error
        return std::clamp(0.5 + (315.0 / 256.0) * poly, 0.0, 1.0);
    }
    static double bump(double s) { return std::abs(s) >= 1.0 ? 0.0 : (315.0 / 256.0) * std::pow(1.0 - s * s, 4); }

    double lower(double x) const { return bump_cdf((x - a_ - eps_) / eps_) - bump_cdf((x - b_ + eps_) / eps_); }
    double upper(double x) const { return bump_cdf((x - a_ + eps_) / eps_) - bump_cdf((x - b_ - eps_) / eps_); }
    double indicator(double x) const { return (x >= a_ && x <= b_) ? 1.0 : 0.0; }

    double integrate_lower(const DistributionTable& t) const { return integrate_table(t, false); }
    double integrate_upper(const DistributionTable& t) const { return integrate_table(t, true); }
    double integrate_lower(const GaussianLaw& g) const { return integrate_gauss(g, false); }
    double integrate_upper(const GaussianLaw& g) const { return integrate_gauss(g, true); }

private:
    double integrate_table(const DistributionTable& t, bool up) const
    {
        detail::require(!t.empty(), "mollified_indicator: empty table");
        double s = 0.0;
        for (std::size_t i = 0; i < t.size(); ++i) s += t.weights()[i] * (up ? upper(t.eigenvalues()[i]) : lower(t.eigenvalues()[i]));
        return s / t.total();
    }

    double integrate_gauss(const GaussianLaw& g, bool up) const
    {
        if (g.degenerate()) return up ? upper(0.0) : lower(0.0);
        // the function is polynomial between these joints and constant 1 on the middle piece
        std::vector<double> joints = up ? std::vector<double>{a_ - 2 * eps_, a_, b_, b_ + 2 * eps_}
                                        : std::vector<double>{a_, a_ + 2 * eps_, b_ - 2 * eps_, b_};
        std::sort(joints.begin(), joints.end());
        const double sigma = std::sqrt(g.variance);
        const auto f = [&](double x) { return (up ? upper(x) : lower(x)) * g.density(x); };
        double s = 0.0;
        for (std::size_t i = 0; i + 1 < joints.size(); ++i) {
            const double lo = joints[i], hi = joints[i + 1];
            if (hi <= lo) continue;
            const bool plateau = (i == 1) && (up || b_ - a_ >= 4 * eps_);
            if (plateau) {
                s += g.cdf(hi) - g.cdf(lo);
            } else {
                const int panels = std::clamp(static_cast<int>(std::ceil((hi - lo) / (0.25 * sigma))), 4, 4096);
                s += integrate(f, lo, hi, panels);
            }
        }
        return s;
    }

    double a_, b_, eps_;
};

/// The chain |P_T[a,b] - P_G[a,b]| <= max(upper gap + upper slack, lower gap + lower slack)
/// evaluated with numerical integrals. `holds()` checks it literally.
struct BracketingCheck {
    double a = 0.0, b = 0.0, eps = 0.0;
    double p_table = 0.0, p_gauss = 0.0;
    double lower_table = 0.0, upper_table = 0.0;
    double lower_gauss = 0.0, upper_gauss = 0.0;

    double lhs() const { return std::abs(p_table - p_gauss); }
    double rhs() const
    {
        const double above = (upper_table - upper_gauss) + (upper_gauss - p_gauss);
        const double below = (lower_gauss - lower_table) + (p_gauss - lower_gauss);
        return std::max(above, below);
    }
    bool sandwich_table() const { return lower_table <= p_table + 1e-15 && p_table <= upper_table + 1e-15; }
    bool sandwich_gauss() const { return lower_gauss <= p_gauss + 1e-13 && p_gauss <= upper_gauss + 1e-13; }
    bool holds() const { return sandwich_table() && sandwich_gauss() && lhs() <= rhs() + 1e-13; }
};

inline BracketingCheck bracketing_check(const DistributionTable& t, const GaussianLaw& g, double a, double b, double eps)
{
    const MollifiedIndicator f(a, b, eps);
    BracketingCheck c;
    c.a = a;
    c.b = b;
    c.eps = eps;
    c.p_table = interval_prob(t, a, b);
    c.p_gauss = g.interval(a, b);
    c.lower_table = f.integrate_lower(t);
    c.upper_table = f.integrate_upper(t);
    c.lower_gauss = f.integrate_lower(g);
    c.upper_gauss = f.integrate_upper(g);
    return c;
}

// --- reports --------------------------------------------------------------------------

struct IntervalGap {
    double a = 0.0, b = 0.0, gap = 0.0;
};

struct CharGap {
    double tau = 0.0, gap = 0.0;
};

/// One (N, k, t) comparison between the exact table and the Gaussian law.
struct ComparisonReport {
    int N = 0;
    int k = 0;
    double t = 0.0;
    double kolmogorov = 0.0;
    std::vector<IntervalGap> interval_gaps;
    std::vector<CharGap> char_gaps;
    double sigma_sq_predicted = 0.0;
    double sigma_sq_empirical = 0.0;
};

inline ComparisonReport compare(const DistributionTable& t, double sigma_sq_predicted, int N, int k, double time,
                                const std::vector<double>& taus, const std::vector<std::pair<double, double>>& intervals)
{
    const GaussianLaw law(sigma_sq_predicted);
    ComparisonReport r;
    r.N = N;
    r.k = k;
    r.t = time;
    r.kolmogorov = kolmogorov_distance(t, law);
    r.sigma_sq_predicted = sigma_sq_predicted;
    r.sigma_sq_empirical = t.moment(2);
    for (const auto& [a, b] : intervals) r.interval_gaps.push_back({a, b, std::abs(interval_prob(t, a, b) - law.interval(a, b))});
    const auto gaps = char_fn_gap(t, sigma_sq_predicted, taus);
    for (std::size_t i = 0; i < taus.size(); ++i) r.char_gaps.push_back({taus[i], gaps[i]});
    return r;
}

inline void write_report_header(std::ostream& os)
{
    os << "N,k,t,kolmogorov,sigma_sq_predicted,sigma_sq_empirical,tau,char_gap\n";
}

/// One row per tau; the per-run fields are repeated.
inline void write_report_rows(std::ostream& os, const ComparisonReport& r)
{
    os.precision(17);
    for (const auto& g : r.char_gaps)
        os << r.N << ',' << r.k << ',' << r.t << ',' << r.kolmogorov << ',' << r.sigma_sq_predicted << ','
           << r.sigma_sq_empirical << ',' << g.tau << ',' << g.gap << '\n';
}

} // namespace mfclt
