#pragma once

// Per-period request arrival probabilities: Poisson creation counts and
// binomially thinned release counts of the slices active at period start.
// All PMFs are evaluated in log space.

#include <cstddef>
#include <span>
#include <vector>

#include "slicemk/domain.hpp"

namespace slicemk {

/// Creation rate lambda_n per operations period and mean lifetime mu_n in
/// operations periods, for each slice type.
struct DemandScenario {
    std::vector<double> creation_rates;
    std::vector<double> mean_lifetimes;

    [[nodiscard]] std::size_t num_types() const noexcept { return creation_rates.size(); }
    /// Throws unless both vectors have length `num_types` and hold finite
    /// positive values.
    void validate(std::size_t num_types) const;
};

/// Probability that one active slice with mean lifetime `mu` ends within a
/// period: 1 - exp(-1/mu).
[[nodiscard]] double release_probability(double mu);

/// lambda^k e^-lambda / k!, including k = 0.
[[nodiscard]] double creation_pmf(double lambda, int k);

/// C(s_n, k) p^k (1-p)^(s_n-k) with p = release_probability(mu). This is the
/// factorial form s!/(k!(s-k)!) (1-e^{-1/mu})^k / e^{(s-k)/mu} rewritten.
[[nodiscard]] double release_pmf(double mu, int s_n, int k);

/// Probability of more than `q_max` creations: 1 - sum_{k<=q_max} pmf.
[[nodiscard]] double creation_tail(double lambda, int q_max);

/// Dispatch on the sign of q (1-based signed type).
[[nodiscard]] double arrival_pmf(const DemandScenario& scenario, int q, int k, const AllocationState& s);

/// Multiplicities of the 2N signed request kinds arriving in one period.
///
/// Kind index: q = +n maps to n-1, q = -n maps to N+n-1.
class RequestMultiset {
public:
    explicit RequestMultiset(std::size_t num_types) : num_types_(num_types), counts_(2 * num_types, 0) {}
    RequestMultiset(std::size_t num_types, std::vector<int> kind_counts);

    static RequestMultiset from_sequence(std::size_t num_types, std::span<const Request> seq);

    [[nodiscard]] std::size_t num_types() const noexcept { return num_types_; }
    [[nodiscard]] std::size_t num_kinds() const noexcept { return counts_.size(); }
    [[nodiscard]] int count(int q) const { return counts_.at(kind_index(q)); }
    [[nodiscard]] int count_of_kind(std::size_t kind) const { return counts_.at(kind); }
    void set(int q, int k);
    [[nodiscard]] int total() const noexcept;
    [[nodiscard]] const std::vector<int>& kind_counts() const noexcept { return counts_; }

    [[nodiscard]] std::size_t kind_index(int q) const;
    [[nodiscard]] int kind_request(std::size_t kind) const;

private:
    std::size_t num_types_;
    std::vector<int> counts_;
};

/// Product over all signed kinds of arrival_pmf.
[[nodiscard]] double multiset_prob(const DemandScenario& scenario, const RequestMultiset& qhat,
                                   const AllocationState& s);

/// multiset_prob / Q!. Q! counts orderings of Q distinguishable requests, so
/// summing this over all Q! permutations of the sequence positions recovers
/// multiset_prob; a distinct ordering of a multiset with repeated kinds stands
/// for prod_q k_q! of those permutations.
[[nodiscard]] double sequence_prob(const DemandScenario& scenario, std::span<const Request> qseq,
                                   const AllocationState& s);

} // namespace slicemk
