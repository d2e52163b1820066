#pragma once

// Resource pools, slice allocations, tenant requests and admission
// strategies. Everything here is immutable once built and safe to share
// across threads.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace slicemk {

/// Absolute slack allowed when checking r_m - sum_n c_mn s_n >= 0, so that
/// boundary allocations such as 3 x 0.3 <= 1 survive floating-point rounding.
inline constexpr double kFeasibilityTolerance = 1e-9;

/// A pool of M resource kinds shared by N slice types.
///
/// The cost matrix is indexed cost(m, n): amount of resource m consumed by one
/// active slice of type n. Construction rejects non-finite or negative values
/// and slice types that cost nothing (their admissibility region would be
/// infinite).
class ResourceModel {
public:
    /// `cost` is given row-major by resource: cost[m][n].
    ResourceModel(std::vector<double> pool, std::vector<std::vector<double>> cost);

    [[nodiscard]] std::size_t num_types() const noexcept { return num_types_; }
    [[nodiscard]] std::size_t num_resources() const noexcept { return pool_.size(); }
    [[nodiscard]] const std::vector<double>& pool() const noexcept { return pool_; }
    [[nodiscard]] double cost(std::size_t m, std::size_t n) const { return cost_.at(m).at(n); }
    [[nodiscard]] const std::vector<std::vector<double>>& cost_matrix() const noexcept { return cost_; }

    /// Largest count of type n that fits on its own: floor(min_m r_m / c_mn)
    /// over the resources type n actually uses.
    [[nodiscard]] int max_count(std::size_t n) const;

private:
    std::vector<double> pool_;
    std::vector<std::vector<double>> cost_;
    std::size_t num_types_ = 0;
};

/// Number of active slices per type. Also a Markov state.
struct AllocationState {
    std::vector<int> counts;

    [[nodiscard]] std::size_t size() const noexcept { return counts.size(); }
    [[nodiscard]] int operator[](std::size_t n) const { return counts[n]; }
    [[nodiscard]] int total() const noexcept;

    auto operator<=>(const AllocationState&) const = default;
    bool operator==(const AllocationState&) const = default;
};

/// "s=[n1,n2,...]"
[[nodiscard]] std::string label(const AllocationState& s);

/// A tenant request: +n creates a type-n slice, -n releases one (1-based).
class Request {
public:
    explicit Request(int signed_type);

    [[nodiscard]] int signed_type() const noexcept { return q_; }
    [[nodiscard]] bool is_creation() const noexcept { return q_ > 0; }
    [[nodiscard]] bool is_release() const noexcept { return q_ < 0; }
    /// 0-based slice type.
    [[nodiscard]] std::size_t type_index() const noexcept {
        return static_cast<std::size_t>(q_ > 0 ? q_ : -q_) - 1;
    }

    bool operator==(const Request&) const = default;

private:
    int q_;
};

enum class Decision : bool { Decline = false, Accept = true };

[[nodiscard]] bool check_feasible(const ResourceModel& model, const AllocationState& s);

/// The finite set of feasible allocations together with its enumeration f
/// (index -> state) and inverse. States are stored in ascending
/// lexicographic order.
class AdmissibilityRegion {
public:
    AdmissibilityRegion() = default;
    AdmissibilityRegion(std::size_t num_types, std::vector<AllocationState> states);

    [[nodiscard]] std::size_t size() const noexcept { return states_.size(); }
    [[nodiscard]] std::size_t num_types() const noexcept { return num_types_; }
    [[nodiscard]] const AllocationState& state(std::size_t i) const { return states_.at(i); }
    [[nodiscard]] const std::vector<AllocationState>& states() const noexcept { return states_; }
    [[nodiscard]] std::optional<std::size_t> index_of(const AllocationState& s) const;
    /// Like index_of but throws when `s` is outside the region.
    [[nodiscard]] std::size_t require_index(const AllocationState& s) const;
    [[nodiscard]] bool contains(const AllocationState& s) const { return index_of(s).has_value(); }

private:
    std::size_t num_types_ = 0;
    std::vector<AllocationState> states_;
    std::map<AllocationState, std::size_t> index_;
};

[[nodiscard]] AdmissibilityRegion enumerate_region(const ResourceModel& model);

/// The asynchronous transition: component |q| moves by d * sgn(q).
[[nodiscard]] AllocationState apply_request(const AllocationState& pre, Request q, Decision d);

/// Decision table over creation requests, indexed (region state, slice type).
///
/// Release requests are not stored: they are accepted in every state, which
/// is the only choice a valid strategy can make for them. A raw table over
/// both request signs therefore corresponds to a valid strategy exactly when
/// all of its release entries are "accept", so valid raw tables and valid
/// creation-only tables are in one-to-one correspondence.
///
/// Bit k = state * num_types + type of the table is the creation decision;
/// code() reads the table as an unsigned integer with bit 0 first.
class Strategy {
public:
    Strategy(std::size_t num_states, std::size_t num_types, std::vector<bool> accept_creation);

    static Strategy from_code(std::size_t num_states, std::size_t num_types, std::uint64_t code);
    static Strategy decline_all(const AdmissibilityRegion& region);
    /// Accepts a creation whenever the result stays inside the region.
    static Strategy always_accept(const AdmissibilityRegion& region);

    [[nodiscard]] std::size_t num_states() const noexcept { return num_states_; }
    [[nodiscard]] std::size_t num_types() const noexcept { return num_types_; }
    [[nodiscard]] bool accepts_creation(std::size_t state_index, std::size_t type) const;
    [[nodiscard]] Decision decide(Request q, std::size_t state_index) const;
    [[nodiscard]] std::uint64_t code() const;
    /// One character per table bit ('1' accept, '0' decline), state-major.
    [[nodiscard]] std::string table_string() const;

    bool operator==(const Strategy&) const = default;

private:
    std::size_t num_states_;
    std::size_t num_types_;
    std::vector<bool> accept_;
};

[[nodiscard]] bool validate_strategy(const ResourceModel& model, const AdmissibilityRegion& region,
                                     const Strategy& strategy);

/// Default bound on the number of creation tables scanned.
inline constexpr std::uint64_t kDefaultStrategyCap = std::uint64_t{1} << 20;

/// Number of creation-only tables, 2^(|S| N); what the enumeration scans.
[[nodiscard]] std::uint64_t creation_table_count(const AdmissibilityRegion& region);

/// All valid strategies in ascending code() order. Throws a Guard error when
/// 2^(|S| N) exceeds `cap`.
[[nodiscard]] std::vector<Strategy> enumerate_valid_strategies(const ResourceModel& model,
                                                               const AdmissibilityRegion& region,
                                                               std::uint64_t cap = kDefaultStrategyCap);

/// Folds the queue left to right through the strategy (the synchronous
/// transition). Throws if any intermediate state leaves the region or a
/// release would make a count negative.
[[nodiscard]] AllocationState apply_sequence(const AdmissibilityRegion& region, const AllocationState& s,
                                             std::span<const Request> queue, const Strategy& strategy);

} // namespace slicemk
