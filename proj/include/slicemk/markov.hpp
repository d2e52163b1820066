#pragma once

// Synchronous transition matrix of the admission chain, built over request
// multisets with at most q_plus_max creations per slice type, plus T-step and
// stationary distributions.

#include <cstddef>
#include <span>
#include <vector>

#include "slicemk/arrival.hpp"
#include "slicemk/domain.hpp"

namespace slicemk {

struct TruncationConfig {
    int q_plus_max = 4;  ///< per-type cap on creation requests per period

    void validate() const;
};

/// Row-major |S| x |S| matrix over the states of `region()`.
class TransitionMatrix {
public:
    TransitionMatrix(AdmissibilityRegion region, std::vector<double> probs, std::vector<double> row_deficits,
                     bool renormalized);

    [[nodiscard]] std::size_t size() const noexcept { return region_.size(); }
    [[nodiscard]] const AdmissibilityRegion& region() const noexcept { return region_; }
    [[nodiscard]] double operator()(std::size_t i, std::size_t j) const { return probs_[i * size() + j]; }
    [[nodiscard]] std::span<const double> row(std::size_t i) const {
        return std::span<const double>(probs_).subspan(i * size(), size());
    }
    [[nodiscard]] const std::vector<double>& entries() const noexcept { return probs_; }
    /// Truncated tail mass per row, measured before any renormalization.
    [[nodiscard]] const std::vector<double>& row_deficits() const noexcept { return deficits_; }
    [[nodiscard]] bool renormalized() const noexcept { return renormalized_; }

    [[nodiscard]] TransitionMatrix renormalize() const;

private:
    AdmissibilityRegion region_;
    std::vector<double> probs_;
    std::vector<double> deficits_;
    bool renormalized_;
};

using StateDistribution = std::vector<double>;

/// Analytical matrix. For every row state s, each multiset with k_{+n} <=
/// q_plus_max and k_{-n} <= s_n contributes its probability, spread over end
/// states by a memoized recursion over (remaining multiset, current state)
/// that picks the next request kind with probability proportional to its
/// remaining multiplicity. Rows are computed on up to `workers` threads
/// (0 = hardware concurrency).
[[nodiscard]] TransitionMatrix build_transition_matrix(const ResourceModel& model, const AdmissibilityRegion& region,
                                                       const DemandScenario& scenario, const Strategy& strategy,
                                                       TruncationConfig trunc, bool renormalize = true,
                                                       unsigned workers = 1);

/// Largest request sequence the permutation oracle will expand.
inline constexpr int kBruteForceMaxSequence = 8;

/// Reference builder: visits every distinct ordering of every admissible
/// multiset, folds it with apply_sequence and sums the sequence
/// probabilities. Throws a Guard error if some multiset is longer than
/// `max_sequence`.
[[nodiscard]] TransitionMatrix brute_force_transition_matrix(const ResourceModel& model,
                                                             const AdmissibilityRegion& region,
                                                             const DemandScenario& scenario,
                                                             const Strategy& strategy, TruncationConfig trunc,
                                                             bool renormalize = false,
                                                             int max_sequence = kBruteForceMaxSequence);

/// sum_n creation_tail(lambda_n, q_plus_max); no row of the matrix loses more mass.
[[nodiscard]] double deficit_bound(const DemandScenario& scenario, TruncationConfig trunc);

/// Row `start` of P^T by repeated vector-matrix products.
[[nodiscard]] StateDistribution distribution_after(const TransitionMatrix& p, std::size_t start, int periods);

/// One step of the chain: dist * P.
[[nodiscard]] StateDistribution step_distribution(const TransitionMatrix& p, std::span<const double> dist);

/// Strongly connected components of the transition graph in order of their
/// smallest state index, and whether each is closed.
struct CommunicatingClass {
    std::vector<std::size_t> states;
    bool closed = false;
};
[[nodiscard]] std::vector<CommunicatingClass> communicating_classes(const TransitionMatrix& p);

/// Power iteration from the uniform distribution. Requires exactly one
/// closed class (transient states are allowed and end with zero mass);
/// throws a Model error listing the classes otherwise, and a Convergence
/// error if the L1 change does not drop below `tolerance`.
[[nodiscard]] StateDistribution stationary_distribution(const TransitionMatrix& p, double tolerance = 1e-12,
                                                        std::size_t max_iterations = 1'000'000);

/// sum_i dist_i * s_i[type]
[[nodiscard]] double mean_occupancy(const AdmissibilityRegion& region, std::span<const double> dist,
                                    std::size_t type = 0);

} // namespace slicemk
