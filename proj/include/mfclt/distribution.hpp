#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <utility>
#include <vector>

#include "mfclt/error.hpp"

namespace mfclt {

/// Discrete probability measure {(eigenvalue, weight)} with eigenvalues
/// sorted ascending. Weights need not sum to one; `total()` is the mass.
class DistributionTable {
public:
    DistributionTable() = default;

    /// Sorts the atoms and merges eigenvalues closer than `merge_tol` to the
    /// first eigenvalue of the current cluster.
    static DistributionTable from_atoms(std::vector<std::pair<double, double>> atoms, double merge_tol = 1e-10)
    {
        DistributionTable t;
        for (const auto& [x, w] : atoms) {
            detail::require(std::isfinite(x) && std::isfinite(w), "distribution: non-finite atom");
            detail::require(w >= 0.0, "distribution: negative weight");
        }
        std::sort(atoms.begin(), atoms.end());
        for (const auto& [x, w] : atoms) {
            if (!t.values_.empty() && std::abs(x - t.cluster_start_) <= merge_tol) {
                // weighted mean keeps the merged atom inside the cluster
                const double wsum = t.weights_.back() + w;
                if (wsum > 0.0) t.values_.back() = (t.values_.back() * t.weights_.back() + x * w) / wsum;
                t.weights_.back() = wsum;
            } else {
                t.values_.push_back(x);
                t.weights_.push_back(w);
                t.cluster_start_ = x;
            }
        }
        return t;
    }

    static DistributionTable point_mass(double x, double weight = 1.0) { return from_atoms({{x, weight}}); }

    const std::vector<double>& eigenvalues() const { return values_; }
    const std::vector<double>& weights() const { return weights_; }
    std::size_t size() const { return values_.size(); }
    bool empty() const { return values_.empty(); }
    double total() const { return std::accumulate(weights_.begin(), weights_.end(), 0.0); }

    /// Image of the measure under x -> c x.
    DistributionTable scaled(double c) const
    {
        std::vector<std::pair<double, double>> atoms;
        atoms.reserve(size());
        for (std::size_t i = 0; i < size(); ++i) atoms.emplace_back(c * values_[i], weights_[i]);
        return from_atoms(std::move(atoms), 0.0);
    }

    /// Normalized moment sum w x^p / total.
    double moment(int p) const
    {
        detail::require(!empty(), "distribution: empty table");
        double s = 0.0;
        for (std::size_t i = 0; i < size(); ++i) s += weights_[i] * std::pow(values_[i], p);
        return s / total();
    }

    /// Columns: eigenvalue, weight.
    void write_csv(std::ostream& os) const
    {
        os << "eigenvalue,weight\n";
        os.precision(17);
        for (std::size_t i = 0; i < size(); ++i) os << values_[i] << ',' << weights_[i] << '\n';
    }

private:
    std::vector<double> values_;
    std::vector<double> weights_;
    double cluster_start_ = 0.0;
};

} // namespace mfclt
