#pragma once

// Monte-Carlo ground truth for the synchronous admission chain. Creation
// requests arrive as Poisson events at uniform times inside each unit
// period, every active slice carries an exponential lifetime, and the
// buffered queue is decided in timestamp order at the period boundary.

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "slicemk/arrival.hpp"
#include "slicemk/domain.hpp"
#include "slicemk/markov.hpp"

namespace slicemk {

using Rng = std::mt19937_64;

/// Independent generator for the substream identified by `path`, e.g.
/// {scenario, strategy, run}. Seeds are mixed with splitmix64.
[[nodiscard]] Rng make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> path);

struct SimConfig {
    std::size_t num_runs = 1000;
    std::size_t periods_per_run = 100;
    std::uint64_t seed = 0;
    /// Fixed start state; empty means uniform over the region.
    std::optional<AllocationState> initial_state;

    void validate(const AdmissibilityRegion& region) const;
};

struct Event {
    double time;  ///< offset inside the period, in [0, 1)
    Request request;
};

/// Requests buffered during one period, ascending by time; equal times keep
/// generation order.
using EventQueue = std::vector<Event>;

/// Remaining lifetime of each active slice, per type, measured from the
/// start of the current period.
struct ActiveSlices {
    std::vector<std::vector<double>> remaining;

    [[nodiscard]] AllocationState counts() const;
};

/// Fresh exponential lifetimes for the slices of `s`.
[[nodiscard]] ActiveSlices spawn_slices(const AllocationState& s, const DemandScenario& scenario, Rng& rng);

[[nodiscard]] EventQueue generate_period_queue(const AllocationState& s, const DemandScenario& scenario,
                                               const ActiveSlices& active, Rng& rng);

/// Region indices of the state at every period boundary, periods + 1 entries.
struct Trajectory {
    std::vector<std::size_t> states;
};

[[nodiscard]] Trajectory run_episode(const ResourceModel& model, const AdmissibilityRegion& region,
                                     const Strategy& strategy, const DemandScenario& scenario,
                                     std::size_t initial_index, std::size_t periods, Rng& rng);

/// Runs cfg.num_runs episodes. Run r draws from make_stream(cfg.seed,
/// {stream..., r}), so results do not depend on `workers`.
[[nodiscard]] std::vector<Trajectory> simulate(const ResourceModel& model, const AdmissibilityRegion& region,
                                               const Strategy& strategy, const DemandScenario& scenario,
                                               const SimConfig& cfg, std::initializer_list<std::uint64_t> stream = {},
                                               unsigned workers = 1);

class EmpiricalMatrix {
public:
    explicit EmpiricalMatrix(std::size_t num_states)
        : n_(num_states), counts_(num_states * num_states, 0), visits_(num_states, 0) {}

    void record(std::size_t from, std::size_t to);
    void merge(const EmpiricalMatrix& other);

    [[nodiscard]] std::size_t size() const noexcept { return n_; }
    [[nodiscard]] std::uint64_t count(std::size_t i, std::size_t j) const { return counts_[i * n_ + j]; }
    [[nodiscard]] std::uint64_t visits(std::size_t i) const { return visits_[i]; }
    [[nodiscard]] bool visited(std::size_t i) const { return visits_[i] > 0; }
    [[nodiscard]] std::uint64_t total() const noexcept;
    /// count / visits; zero for unvisited rows (check visited()).
    [[nodiscard]] double prob(std::size_t i, std::size_t j) const;
    [[nodiscard]] std::vector<std::size_t> unvisited_rows() const;

private:
    std::size_t n_;
    std::vector<std::uint64_t> counts_;
    std::vector<std::uint64_t> visits_;
};

[[nodiscard]] EmpiricalMatrix estimate_empirical_matrix(std::span<const Trajectory> trajectories,
                                                        std::size_t num_states);

struct RmseResult {
    double value = 0;
    std::vector<std::size_t> excluded_rows;  ///< unvisited in the empirical matrix
};

/// Symmetric relative RMSE over all |S|^2 entries. Entries where both
/// matrices are zero contribute 0; unvisited empirical rows contribute 0 and
/// are reported; the divisor stays |S|^2.
[[nodiscard]] RmseResult rmse(const TransitionMatrix& analytical, const EmpiricalMatrix& empirical);

/// Fraction of episodes in each state at each boundary, [period][state].
[[nodiscard]] std::vector<std::vector<double>> occupancy_by_period(std::span<const Trajectory> trajectories,
                                                                   std::size_t num_states);

struct MarkovCheck {
    double statistic = 0;
    std::size_t degrees_of_freedom = 0;
    double p_value = 1;
};

/// Pearson chi-square test that s(t+1) is independent of s(t-1) given s(t),
/// pooled over conditioning states. Rows and columns with zero margins are
/// dropped from each conditional table.
[[nodiscard]] MarkovCheck markov_property_test(std::span<const Trajectory> trajectories, std::size_t num_states);

} // namespace slicemk
