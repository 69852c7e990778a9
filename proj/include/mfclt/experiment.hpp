#pragma once

// Config-driven experiments. Each scan returns its rows in memory and, when
// given an output directory, writes them as CSV next to the resolved config
// and a version stamp.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mfclt/bogoliubov.hpp"
#include "mfclt/config.hpp"
#include "mfclt/distribution.hpp"
#include "mfclt/fock.hpp"
#include "mfclt/stats.hpp"
#include "mfclt/version.hpp"

namespace mfclt {

/// A (N, t, k) cell that could not be completed. `k` is 0 when the failure
/// happened before the observable was involved.
struct CellError {
    int N = 0;
    double t = 0.0;
    int k = 0;
    std::string stage;
    std::string message;
};

// --- desk setup -----------------------------------------------------------------------

inline Potential make_potential(const PotentialConfig& c, const Grid& g)
{
    if (c.shape == "gaussian") return gaussian_potential(g, c.g, c.w);
    if (c.shape == "constant") return constant_potential(g, c.g);
    if (c.shape == "delta") return delta_potential(g, c.g);
    if (c.shape == "zero") return constant_potential(g, 0.0);
    throw ValidationError("unknown potential shape: " + c.shape);
}

inline Field make_initial_state(const InitialStateConfig& c, const Grid& g)
{
    if (c.shape == "gaussian") return gaussian_packet(g, c.center, c.width, c.momentum);
    if (c.shape == "plane_wave") return plane_wave(g, c.momentum);
    if (c.shape == "constant") return normalized(Field(g, CVector::Ones(g.sites())));
    throw ValidationError("unknown initial state shape: " + c.shape);
}

inline KOperator make_observable(const ObservableConfig& c, int k, const Grid& g)
{
    const int M = g.sites();
    if (c.preset == "random_hermitian") return random_hermitian(k, M, c.seed);
    if (c.preset == "tensor_power") return tensor_power(random_hermitian(1, M, c.seed), k);
    if (c.preset == "identity") return KOperator::identity(k, M);
    if (c.preset == "rank_one") {
        detail::require(k == 1, "rank_one observable is one-particle only");
        detail::require(static_cast<int>(c.field.size()) == M, "rank_one field length does not match the grid");
        CVector v(M);
        for (int i = 0; i < M; ++i) v[i] = cplx(c.field[i].first, c.field[i].second);
        return rank_one(Field(g, v));
    }
    if (c.preset == "file") {
        std::string path = c.path;
        const auto pos = path.find("{k}");
        if (pos != std::string::npos) path.replace(pos, 3, std::to_string(k));
        std::ifstream in(path);
        if (!in) throw ValidationError("observable: cannot open " + path);
        KOperator O = read_koperator_csv(in, M);
        detail::require(O.k() == k, "observable: file " + path + " holds a rank " + std::to_string(O.k()) + " operator");
        return O;
    }
    throw ValidationError("unknown observable preset: " + c.preset);
}

/// Short comma-free label used in CSV rows.
inline std::string observable_id(const ObservableConfig& c, int k)
{
    std::string id = c.preset;
    if (c.preset == "random_hermitian" || c.preset == "tensor_power") id += "/seed" + std::to_string(c.seed);
    return id + "/k" + std::to_string(k);
}

inline long fock_dimension(int modes, int nmax)
{
    return static_cast<long>(binomial(nmax + modes, modes));
}

/// Cutoff for N particles on M modes. "N+m" adds a fixed margin; "tail:eps"
/// takes the smallest Nmax whose Poisson(N) tail beyond it is at most eps.
/// The result is lowered until the dimension fits `dim_cap`, but never below N.
inline int choose_nmax(const CutoffConfig& c, int N, int modes)
{
    const NmaxRule rule = parse_nmax_rule(c.nmax_rule);
    int nmax = N + rule.margin;
    if (rule.tail) {
        double term = std::exp(-static_cast<double>(N));
        double cdf = term;
        nmax = 0;
        while (1.0 - cdf > rule.eps && nmax < 10000) {
            ++nmax;
            term *= static_cast<double>(N) / nmax;
            cdf += term;
        }
    }
    while (nmax > N && fock_dimension(modes, nmax) > c.dim_cap) --nmax;
    if (fock_dimension(modes, nmax) > c.dim_cap)
        throw CapExceeded("fock space for N = " + std::to_string(N) + " exceeds the dimension cap");
    return nmax;
}

struct Desk {
    Config config;
    Grid grid;
    Potential potential;
    Field phi0;
    HartreeTrajectory traj;
    FlowOptions flow;
    EvolveOptions evolve;
    SpectralOptions spectral;
    KernelConvention convention = KernelConvention::exchange;
};

inline Desk make_desk(const Config& cfg)
{
    validate(cfg);
    Desk d;
    d.config = cfg;
    d.grid = make_grid(cfg.grid.d, cfg.grid.L, cfg.grid.a);
    d.potential = make_potential(cfg.potential, d.grid);
    d.phi0 = make_initial_state(cfg.initial_state, d.grid);
    const double T = cfg.max_time();
    const double dt_store = cfg.solver.dt_store > 0.0 ? std::min(cfg.solver.dt_store, T) : T / 200.0;
    const double dt = std::min(cfg.solver.dt_hartree, std::max(dt_store, std::numeric_limits<double>::min()));
    const SplitScheme scheme = cfg.solver.scheme == "yoshida4" ? SplitScheme::yoshida4 : SplitScheme::strang;
    d.traj = evolve_hartree(d.phi0, d.potential, T, dt, dt_store, scheme);
    d.convention = parse_kernel_convention(cfg.solver.kernel_convention);
    d.flow.convention = d.convention;
    d.flow.project_final_condition = cfg.flags.project_final_condition;
    d.flow.dt = cfg.solver.dt_flow;
    d.evolve.tol = cfg.solver.krylov_tol;
    d.spectral.dense_cap = cfg.cutoffs.dense_cap;
    return d;
}

inline std::vector<double> sorted_times(const std::vector<double>& ts)
{
    std::vector<double> out = ts;
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

/// Evolves the coherent state W(sqrt(N) phi0) Omega under H_N through the
/// sorted time list and calls `visit(t, psi_t)` at each time. Failures of the
/// visitor are the caller's business; failures of the evolution end the sweep
/// and are recorded for every remaining time.
inline void sweep_many_body(const Desk& d, int N, const std::function<void(double, const FockVector&)>& visit,
                            std::vector<CellError>& errors)
{
    const std::vector<double> times = sorted_times(d.config.t_list);
    std::size_t done = 0;
    try {
        const int M = d.grid.sites();
        const FockSpacePtr space = build_fock_space(M, choose_nmax(d.config.cutoffs, N, M), d.config.cutoffs.dim_cap);
        const SparseHermitian H = hamiltonian_HN(*space, d.grid, d.potential, N);
        FockVector psi = coherent_state(d.phi0, N, space);
        double now = 0.0;
        for (; done < times.size(); ++done) {
            psi = evolve(psi, H, times[done] - now, d.config.solver.dt_fock, d.evolve);
            now = times[done];
            visit(now, psi);
        }
    } catch (const std::exception& e) {
        for (; done < times.size(); ++done) errors.push_back({N, times[done], 0, "many_body", e.what()});
    }
}

// --- CLT and LLN scans ----------------------------------------------------------------

struct CltCell {
    int N = 0;
    int k = 0;
    double t = 0.0;
    std::string observable_id;
    ComparisonReport report;
    bool exact_table = true; ///< false when the char-fn fallback was used
    DistributionTable table; ///< law of N^{-k+1/2} dGamma_k(O~_t)
    std::vector<BracketingCheck> brackets;
    double truncation_mass = 1.0;
};

struct LlnRow {
    int N = 0;
    int k = 0;
    double t = 0.0;
    double delta_factor = 0.0;
    double delta = 0.0;
    double exact_tail = 0.0;
    double chebyshev_bound = 0.0;
    double second_moment = 0.0; ///< <dGamma_k(O~_t)^2>
};

struct VarianceRow {
    int k = 0;
    double t = 0.0;
    double sigma_sq = 0.0;
    std::string observable_id;
    double max_structure_defect = 0.0;
};

struct OverlapRow {
    int N = 0;
    int k = 0;
    double t = 0.0;
    int shared = 0;
    double contribution = 0.0;
};

struct ScanResult {
    std::vector<CltCell> cells;
    std::vector<LlnRow> lln;
    std::vector<OverlapRow> overlap;
    std::vector<VarianceRow> variance;
    std::vector<CellError> errors;
};

/// sigma_t^2 for every (k, t) of the config.
inline std::vector<VarianceRow> variance_curve(const Desk& d, std::vector<CellError>& errors)
{
    std::vector<VarianceRow> rows;
    for (int k : d.config.observable.k_list) {
        const KOperator O = make_observable(d.config.observable, k, d.grid);
        for (double t : sorted_times(d.config.t_list)) {
            try {
                const VarianceResult r = variance_detail(O, d.traj, t, d.flow);
                rows.push_back({k, t, r.sigma_sq, observable_id(d.config.observable, k), r.max_structure_defect});
            } catch (const std::exception& e) {
                errors.push_back({0, t, k, "variance", e.what()});
            }
        }
    }
    return rows;
}

namespace detail {

inline const VarianceRow* find_variance(const std::vector<VarianceRow>& rows, int k, double t)
{
    for (const auto& r : rows)
        if (r.k == k && r.t == t) return &r;
    return nullptr;
}

} // namespace detail

/// Runs the many-body sweep once and evaluates the CLT comparison and/or the
/// LLN tails on the same exact distributions.
inline ScanResult scan(const Desk& d, bool want_clt, bool want_lln)
{
    ScanResult out;
    const Config& cfg = d.config;
    out.variance = variance_curve(d, out.errors);
    std::map<int, KOperator> ops;
    for (int k : cfg.observable.k_list) ops.emplace(k, make_observable(cfg.observable, k, d.grid));

    for (int N : cfg.N_list) {
        const auto visit = [&](double t, const FockVector& psi) {
            const Field phi_t = interpolate(d.traj, t);
            for (int k : cfg.observable.k_list) {
                if (k > N) continue;
                const KOperator& O = ops.at(k);
                try {
                    const SparseHermitian D = dGamma_k(*psi.space, center_operator(O, phi_t));
                    const double scale = std::pow(static_cast<double>(N), 0.5 - k);
                    const double binom = static_cast<double>(binomial(N, k));
                    DistributionTable table;
                    bool exact = true;
                    try {
                        table = spectral_distribution(psi, D, d.spectral);
                    } catch (const CapExceeded& e) {
                        exact = false;
                        out.errors.push_back({N, t, k, "spectral", e.what()});
                    }
                    const double second = exact ? table.moment(2) : D.apply(psi.amplitudes).squaredNorm() / psi.norm_squared();

                    if (want_clt) {
                        const VarianceRow* v = detail::find_variance(out.variance, k, t);
                        if (!v) throw NumericalError("no limiting variance available");
                        CltCell cell;
                        cell.N = N;
                        cell.k = k;
                        cell.t = t;
                        cell.observable_id = v->observable_id;
                        cell.exact_table = exact;
                        cell.truncation_mass = psi.truncation_mass;
                        if (exact) {
                            cell.table = table.scaled(scale);
                            cell.report = compare(cell.table, v->sigma_sq, N, k, t, cfg.stats.tau_list, cfg.stats.intervals);
                            const GaussianLaw law(v->sigma_sq);
                            for (const auto& [a, b] : cfg.stats.intervals)
                                cell.brackets.push_back(bracketing_check(cell.table, law, a, b, cfg.stats.epsilon));
                        } else {
                            ComparisonReport& r = cell.report;
                            r.N = N;
                            r.k = k;
                            r.t = t;
                            r.kolmogorov = std::numeric_limits<double>::quiet_NaN();
                            r.sigma_sq_predicted = v->sigma_sq;
                            r.sigma_sq_empirical = second * scale * scale;
                            const SparseHermitian X = D.scaled(scale);
                            for (double tau : cfg.stats.tau_list) {
                                const cplx cf = characteristic_function(psi, X, tau, d.evolve);
                                r.char_gaps.push_back({tau, std::abs(cf - GaussianLaw(v->sigma_sq).char_fn(tau))});
                            }
                        }
                        out.cells.push_back(std::move(cell));
                    }
                    if (want_lln) {
                        for (double f : cfg.stats.delta_factors) {
                            LlnRow row{N, k, t, f, f * O.opnorm(), std::numeric_limits<double>::quiet_NaN(), 0.0, second};
                            if (exact) row.exact_tail = tail_probability(table, row.delta * binom);
                            row.chebyshev_bound = chebyshev_bound(second, binom, row.delta);
                            out.lln.push_back(row);
                        }
                        const std::vector<double> parts = factorized_second_moment_by_overlap(O, phi_t, N);
                        for (std::size_t l = 0; l < parts.size(); ++l)
                            out.overlap.push_back({N, k, t, static_cast<int>(l), parts[l]});
                    }
                } catch (const std::exception& e) {
                    out.errors.push_back({N, t, k, "observable", e.what()});
                }
            }
        };
        sweep_many_body(d, N, visit, out.errors);
    }
    return out;
}

// --- norm approximation ---------------------------------------------------------------

struct NormApproxRow {
    int N = 0;
    double t = 0.0;
    double norm_error = 0.0;   ///< sqrt(|psi|^2 + |xi|^2 - 2 |<psi, xi>|), blind to a global phase
    double raw_distance = 0.0; ///< |psi - xi|
    double abs_overlap = 0.0;
    double re_overlap = 0.0;
    double norm_psi = 0.0;
    double norm_xi = 0.0;
    double mass_lost = 0.0; ///< truncation loss of the Weyl displacement
};

struct NormApproxResult {
    std::vector<NormApproxRow> rows;
    std::vector<CellError> errors;
};

inline NormApproxResult norm_approx(const Desk& d)
{
    NormApproxResult out;
    const Config& cfg = d.config;
    const std::vector<double> times = sorted_times(cfg.t_list);
    for (int N : cfg.N_list) {
        std::size_t done = 0;
        try {
            const int M = d.grid.sites();
            const FockSpacePtr space = build_fock_space(M, choose_nmax(cfg.cutoffs, N, M), cfg.cutoffs.dim_cap);
            const SparseHermitian H = hamiltonian_HN(*space, d.grid, d.potential, N);
            const QuadraticAssembler assembler(*space);
            FockVector psi = coherent_state(d.phi0, N, space);
            FockVector bogo = vacuum(space);
            double now = 0.0;
            for (; done < times.size(); ++done) {
                const double t = times[done];
                psi = evolve(psi, H, t - now, cfg.solver.dt_fock, d.evolve);
                const double start = now;
                const GeneratorSource gen = [&](double s) {
                    return quadratic_generator(assembler, interpolate(d.traj, start + s), d.potential, d.convention,
                                               cfg.solver.pairing_prefactor);
                };
                bogo = evolve(bogo, gen, t - now, cfg.solver.dt_fock, d.evolve);
                now = t;
                try {
                    const FockVector xi = weyl_displace(bogo, interpolate(d.traj, t), N, +1);
                    const cplx ov = overlap(psi, xi);
                    NormApproxRow r;
                    r.N = N;
                    r.t = t;
                    r.norm_psi = std::sqrt(psi.norm_squared());
                    r.norm_xi = std::sqrt(xi.norm_squared());
                    r.abs_overlap = std::abs(ov);
                    r.re_overlap = ov.real();
                    r.norm_error = std::sqrt(std::max(0.0, psi.norm_squared() + xi.norm_squared() - 2.0 * std::abs(ov)));
                    r.raw_distance = (psi.amplitudes - xi.amplitudes).norm();
                    r.mass_lost = std::max(0.0, bogo.truncation_mass - xi.truncation_mass);
                    out.rows.push_back(r);
                } catch (const std::exception& e) {
                    out.errors.push_back({N, t, 0, "weyl_displace", e.what()});
                }
            }
        } catch (const std::exception& e) {
            for (; done < times.size(); ++done) out.errors.push_back({N, times[done], 0, "many_body", e.what()});
        }
    }
    return out;
}

// --- variance comparison --------------------------------------------------------------

struct FactorizedRow {
    int k = 0;
    int N = 0;
    double sigma_N_sq = 0.0; ///< exact product-state variance
    double scaled = 0.0;     ///< sigma_N_sq / N^{2k-1}
    double sum_M = 0.0;      ///< sum_{i,j} M(i,j)
    double leading_scaled = 0.0;
};

struct VarianceCompareRow {
    int k = 0;
    double t = 0.0;
    double sigma_sq_projected = 0.0;
    double sigma_sq_unprojected = 0.0;
    double max_structure_defect = 0.0;
};

struct VarianceCompareResult {
    std::vector<FactorizedRow> factorized;
    std::vector<VarianceCompareRow> curve;
    std::vector<CellError> errors;
};

/// Product-state rows use phi0 and only the N with N >= 2k; the time curve
/// evaluates sigma_t^2 with and without the projection of the final condition.
inline VarianceCompareResult variance_compare(const Desk& d)
{
    VarianceCompareResult out;
    const Config& cfg = d.config;
    for (int k : cfg.observable.k_list) {
        const KOperator O = make_observable(cfg.observable, k, d.grid);
        const double sum_M = factorized_covariance(O, d.phi0).total();
        for (int N : cfg.N_list) {
            if (N < 2 * k) continue;
            try {
                FactorizedRow r;
                r.k = k;
                r.N = N;
                r.sigma_N_sq = factorized_variance_exact(O, d.phi0, N);
                const double norm = std::pow(static_cast<double>(N), 2 * k - 1);
                r.scaled = r.sigma_N_sq / norm;
                r.sum_M = sum_M;
                r.leading_scaled = factorized_variance_leading(O, d.phi0, N) / norm;
                out.factorized.push_back(r);
            } catch (const std::exception& e) {
                out.errors.push_back({N, 0.0, k, "factorized", e.what()});
            }
        }
        FlowOptions projected = d.flow, plain = d.flow;
        projected.project_final_condition = true;
        plain.project_final_condition = false;
        for (double t : sorted_times(cfg.t_list)) {
            try {
                const VarianceResult a = variance_detail(O, d.traj, t, projected);
                const VarianceResult b = variance_detail(O, d.traj, t, plain);
                out.curve.push_back({k, t, a.sigma_sq, b.sigma_sq, std::max(a.max_structure_defect, b.max_structure_defect)});
            } catch (const std::exception& e) {
                out.errors.push_back({0, t, k, "variance", e.what()});
            }
        }
    }
    return out;
}

// --- output ---------------------------------------------------------------------------

namespace detail {

/// Writes through a temporary file and renames it into place.
inline void write_file(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body)
{
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw std::runtime_error("cannot write " + tmp.string());
        os.precision(17);
        body(os);
        if (!os) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline std::string time_label(double t)
{
    std::ostringstream ss;
    ss << t;
    return ss.str();
}

} // namespace detail

inline void write_errors_csv(std::ostream& os, const std::vector<CellError>& errors)
{
    os << "N,t,k,stage,error\n";
    for (const auto& e : errors) {
        std::string msg = e.message;
        std::replace(msg.begin(), msg.end(), '"', '\'');
        os << e.N << ',' << e.t << ',' << e.k << ',' << e.stage << ",\"" << msg << "\"\n";
    }
}

/// Resolved config, version stamp and errors.csv; creates the directory.
inline void write_run_metadata(const std::filesystem::path& dir, const Config& cfg, const std::vector<CellError>& errors)
{
    std::filesystem::create_directories(dir);
    detail::write_file(dir / "config.resolved.json", [&](std::ostream& os) { os << to_json(cfg).dump(2) << '\n'; });
    detail::write_file(dir / "VERSION", [&](std::ostream& os) { os << "mfclt " << version() << '\n'; });
    detail::write_file(dir / "errors.csv", [&](std::ostream& os) { write_errors_csv(os, errors); });
}

inline void write_variance_rows(const std::filesystem::path& path, const std::vector<VarianceRow>& rows)
{
    detail::write_file(path, [&](std::ostream& os) {
        os << "t,sigma_sq,k,observable_id\n";
        for (const auto& r : rows) os << r.t << ',' << r.sigma_sq << ',' << r.k << ',' << r.observable_id << '\n';
    });
}

inline void write_clt_outputs(const std::filesystem::path& dir, const Config& cfg, const ScanResult& r)
{
    write_run_metadata(dir, cfg, r.errors);
    write_variance_rows(dir / "variance.csv", r.variance);
    detail::write_file(dir / "report.csv", [&](std::ostream& os) {
        write_report_header(os);
        for (const auto& c : r.cells) write_report_rows(os, c.report);
    });
    detail::write_file(dir / "intervals.csv", [&](std::ostream& os) {
        os << "N,k,t,a,b,eps,p_table,p_gauss,gap,lower_table,upper_table,lower_gauss,upper_gauss,bracket_rhs,holds\n";
        for (const auto& c : r.cells)
            for (const auto& b : c.brackets)
                os << c.N << ',' << c.k << ',' << c.t << ',' << b.a << ',' << b.b << ',' << b.eps << ',' << b.p_table << ','
                   << b.p_gauss << ',' << b.lhs() << ',' << b.lower_table << ',' << b.upper_table << ',' << b.lower_gauss
                   << ',' << b.upper_gauss << ',' << b.rhs() << ',' << (b.holds() ? 1 : 0) << '\n';
    });
    for (const auto& c : r.cells) {
        if (!c.exact_table) continue;
        const std::string name =
            "dist_N" + std::to_string(c.N) + "_k" + std::to_string(c.k) + "_t" + detail::time_label(c.t) + ".csv";
        detail::write_file(dir / name, [&](std::ostream& os) { c.table.write_csv(os); });
    }
}

inline void write_lln_outputs(const std::filesystem::path& dir, const Config& cfg, const ScanResult& r)
{
    write_run_metadata(dir, cfg, r.errors);
    detail::write_file(dir / "lln.csv", [&](std::ostream& os) {
        os << "N,t,k,delta_factor,delta,exact_tail,chebyshev_bound,second_moment\n";
        for (const auto& l : r.lln)
            os << l.N << ',' << l.t << ',' << l.k << ',' << l.delta_factor << ',' << l.delta << ',' << l.exact_tail << ','
               << l.chebyshev_bound << ',' << l.second_moment << '\n';
    });
    detail::write_file(dir / "lln_overlap.csv", [&](std::ostream& os) {
        os << "N,t,k,shared,contribution\n";
        for (const auto& o : r.overlap) os << o.N << ',' << o.t << ',' << o.k << ',' << o.shared << ',' << o.contribution << '\n';
    });
}

inline void write_norm_outputs(const std::filesystem::path& dir, const Config& cfg, const NormApproxResult& r)
{
    write_run_metadata(dir, cfg, r.errors);
    detail::write_file(dir / "norm_approx.csv", [&](std::ostream& os) {
        os << "N,t,norm_error,raw_distance,abs_overlap,re_overlap,norm_psi,norm_xi,mass_lost\n";
        for (const auto& x : r.rows)
            os << x.N << ',' << x.t << ',' << x.norm_error << ',' << x.raw_distance << ',' << x.abs_overlap << ','
               << x.re_overlap << ',' << x.norm_psi << ',' << x.norm_xi << ',' << x.mass_lost << '\n';
    });
}

inline void write_variance_compare_outputs(const std::filesystem::path& dir, const Config& cfg,
                                           const VarianceCompareResult& r)
{
    write_run_metadata(dir, cfg, r.errors);
    detail::write_file(dir / "variance_compare.csv", [&](std::ostream& os) {
        os << "k,N,sigma_N_sq,scaled,sum_M,leading_scaled\n";
        for (const auto& f : r.factorized)
            os << f.k << ',' << f.N << ',' << f.sigma_N_sq << ',' << f.scaled << ',' << f.sum_M << ',' << f.leading_scaled << '\n';
    });
    detail::write_file(dir / "variance_t.csv", [&](std::ostream& os) {
        os << "t,k,sigma_sq_projected,sigma_sq_unprojected,max_structure_defect\n";
        for (const auto& c : r.curve)
            os << c.t << ',' << c.k << ',' << c.sigma_sq_projected << ',' << c.sigma_sq_unprojected << ','
               << c.max_structure_defect << '\n';
    });
    std::vector<VarianceRow> rows;
    for (const auto& c : r.curve) rows.push_back({c.k, c.t, c.sigma_sq_projected, observable_id(cfg.observable, c.k), 0.0});
    write_variance_rows(dir / "variance.csv", rows);
}

} // namespace mfclt
