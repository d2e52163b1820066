#include "slicemk/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <boost/math/distributions/chi_squared.hpp>

#include "parallel.hpp"
#include "slicemk/error.hpp"

namespace slicemk {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

[[noreturn]] void consistency_failure(const std::string& what) {
    fail(ErrorKind::Internal, "simulator consistency violation: " + what);
}

} // namespace

Rng make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    std::uint64_t h = splitmix64(seed);
    for (std::uint64_t p : path) h = splitmix64(h ^ splitmix64(p + 0x632be59bd9b4e019ULL));
    std::seed_seq seq{static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
    return Rng(seq);
}

void SimConfig::validate(const AdmissibilityRegion& region) const {
    if (num_runs == 0 || periods_per_run == 0) fail(ErrorKind::Config, "num_runs and periods_per_run must be > 0");
    if (initial_state && !region.contains(*initial_state))
        fail(ErrorKind::Config, "initial state " + label(*initial_state) + " is outside the admissibility region");
}

AllocationState ActiveSlices::counts() const {
    AllocationState s{std::vector<int>(remaining.size())};
    for (std::size_t n = 0; n < remaining.size(); ++n) s.counts[n] = static_cast<int>(remaining[n].size());
    return s;
}

ActiveSlices spawn_slices(const AllocationState& s, const DemandScenario& scenario, Rng& rng) {
    ActiveSlices active;
    active.remaining.resize(s.size());
    for (std::size_t n = 0; n < s.size(); ++n) {
        std::exponential_distribution<double> lifetime(1.0 / scenario.mean_lifetimes.at(n));
        for (int k = 0; k < s[n]; ++k) active.remaining[n].push_back(lifetime(rng));
    }
    return active;
}

EventQueue generate_period_queue(const AllocationState& s, const DemandScenario& scenario,
                                 const ActiveSlices& active, Rng& rng) {
    if (active.counts() != s) consistency_failure("active slices do not match state " + label(s));
    EventQueue queue;
    std::uniform_real_distribution<double> when(0.0, 1.0);
    for (std::size_t n = 0; n < s.size(); ++n) {
        std::poisson_distribution<int> arrivals(scenario.creation_rates.at(n));
        const int count = arrivals(rng);
        for (int k = 0; k < count; ++k) queue.push_back({when(rng), Request(static_cast<int>(n) + 1)});
    }
    for (std::size_t n = 0; n < s.size(); ++n)
        for (double left : active.remaining[n])
            if (left < 1.0) queue.push_back({left, Request(-static_cast<int>(n) - 1)});
    std::stable_sort(queue.begin(), queue.end(), [](const Event& a, const Event& b) { return a.time < b.time; });
    return queue;
}

Trajectory run_episode(const ResourceModel& model, const AdmissibilityRegion& region, const Strategy& strategy,
                       const DemandScenario& scenario, std::size_t initial_index, std::size_t periods, Rng& rng) {
    const std::size_t types = model.num_types();
    if (initial_index >= region.size()) fail(ErrorKind::Argument, "initial state index out of range");

    AllocationState state = region.state(initial_index);
    std::size_t index = initial_index;
    ActiveSlices active = spawn_slices(state, scenario, rng);
    Trajectory traj;
    traj.states.reserve(periods + 1);
    traj.states.push_back(index);

    std::vector<int> admitted(types);
    std::vector<int> released(types);
    for (std::size_t t = 0; t < periods; ++t) {
        const EventQueue queue = generate_period_queue(state, scenario, active, rng);
        std::fill(admitted.begin(), admitted.end(), 0);
        std::fill(released.begin(), released.end(), 0);

        AllocationState cur = state;
        for (const Event& ev : queue) {
            const Decision d = strategy.decide(ev.request, index);
            cur = apply_request(cur, ev.request, d);
            const auto next = region.index_of(cur);
            if (!next) consistency_failure("state " + label(cur) + " left the admissibility region");
            index = *next;
            const std::size_t n = ev.request.type_index();
            if (ev.request.is_release()) {
                if (++released[n] > state[n]) consistency_failure("more releases than period-start slices");
            } else if (d == Decision::Accept) {
                ++admitted[n];
            }
        }

        for (std::size_t n = 0; n < types; ++n) {
            auto& lives = active.remaining[n];
            std::erase_if(lives, [](double left) { return left < 1.0; });
            for (double& left : lives) left -= 1.0;
            std::exponential_distribution<double> lifetime(1.0 / scenario.mean_lifetimes[n]);
            for (int k = 0; k < admitted[n]; ++k) lives.push_back(lifetime(rng));
        }
        if (active.counts() != cur) consistency_failure("slice bookkeeping diverged from state " + label(cur));
        state = std::move(cur);
        traj.states.push_back(index);
    }
    return traj;
}

std::vector<Trajectory> simulate(const ResourceModel& model, const AdmissibilityRegion& region,
                                 const Strategy& strategy, const DemandScenario& scenario, const SimConfig& cfg,
                                 std::initializer_list<std::uint64_t> stream, unsigned workers) {
    cfg.validate(region);
    scenario.validate(model.num_types());
    if (!validate_strategy(model, region, strategy)) fail(ErrorKind::Model, "strategy is not valid for this region");
    const std::vector<std::uint64_t> prefix(stream);

    std::vector<Trajectory> runs(cfg.num_runs);
    detail::parallel_for(cfg.num_runs, workers, [&](std::size_t r) {
        std::uint64_t h = cfg.seed;
        for (std::uint64_t p : prefix) h = splitmix64(h ^ splitmix64(p));
        Rng rng = make_stream(h, {static_cast<std::uint64_t>(r)});
        std::size_t start = 0;
        if (cfg.initial_state) {
            start = region.require_index(*cfg.initial_state);
        } else {
            std::uniform_int_distribution<std::size_t> pick(0, region.size() - 1);
            start = pick(rng);
        }
        runs[r] = run_episode(model, region, strategy, scenario, start, cfg.periods_per_run, rng);
    });
    return runs;
}

void EmpiricalMatrix::record(std::size_t from, std::size_t to) {
    if (from >= n_ || to >= n_) fail(ErrorKind::Argument, "state index out of range");
    ++counts_[from * n_ + to];
    ++visits_[from];
}

void EmpiricalMatrix::merge(const EmpiricalMatrix& other) {
    if (other.n_ != n_) fail(ErrorKind::Argument, "cannot merge empirical matrices of different size");
    for (std::size_t k = 0; k < counts_.size(); ++k) counts_[k] += other.counts_[k];
    for (std::size_t k = 0; k < n_; ++k) visits_[k] += other.visits_[k];
}

std::uint64_t EmpiricalMatrix::total() const noexcept {
    std::uint64_t t = 0;
    for (auto v : visits_) t += v;
    return t;
}

double EmpiricalMatrix::prob(std::size_t i, std::size_t j) const {
    if (visits_.at(i) == 0) return 0.0;
    return static_cast<double>(counts_.at(i * n_ + j)) / static_cast<double>(visits_[i]);
}

std::vector<std::size_t> EmpiricalMatrix::unvisited_rows() const {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < n_; ++i)
        if (!visited(i)) rows.push_back(i);
    return rows;
}

EmpiricalMatrix estimate_empirical_matrix(std::span<const Trajectory> trajectories, std::size_t num_states) {
    EmpiricalMatrix m(num_states);
    for (const auto& tr : trajectories)
        for (std::size_t t = 1; t < tr.states.size(); ++t) m.record(tr.states[t - 1], tr.states[t]);
    if (m.total() == 0) fail(ErrorKind::Argument, "no transitions observed");
    return m;
}

RmseResult rmse(const TransitionMatrix& analytical, const EmpiricalMatrix& empirical) {
    const std::size_t n = analytical.size();
    if (empirical.size() != n) fail(ErrorKind::Argument, "matrices index different regions");
    RmseResult result;
    double sum = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!empirical.visited(i)) {
            result.excluded_rows.push_back(i);
            continue;
        }
        for (std::size_t j = 0; j < n; ++j) {
            const double a = analytical(i, j);
            const double b = empirical.prob(i, j);
            if (a + b == 0) continue;
            const double rel = 2 * (a - b) / (a + b);
            sum += rel * rel;
        }
    }
    result.value = std::sqrt(sum / static_cast<double>(n * n));
    return result;
}

std::vector<std::vector<double>> occupancy_by_period(std::span<const Trajectory> trajectories,
                                                     std::size_t num_states) {
    if (trajectories.empty()) fail(ErrorKind::Argument, "no trajectories");
    const std::size_t len = trajectories.front().states.size();
    std::vector<std::vector<double>> pmf(len, std::vector<double>(num_states, 0.0));
    for (const auto& tr : trajectories) {
        if (tr.states.size() != len) fail(ErrorKind::Argument, "trajectories have different lengths");
        for (std::size_t t = 0; t < len; ++t) pmf[t].at(tr.states[t]) += 1.0;
    }
    const auto runs = static_cast<double>(trajectories.size());
    for (auto& row : pmf)
        for (double& v : row) v /= runs;
    return pmf;
}

MarkovCheck markov_property_test(std::span<const Trajectory> trajectories, std::size_t num_states) {
    const std::size_t n = num_states;
    // counts[mid][prev][next]
    std::vector<double> counts(n * n * n, 0.0);
    for (const auto& tr : trajectories)
        for (std::size_t t = 2; t < tr.states.size(); ++t)
            counts[(tr.states[t - 1] * n + tr.states[t - 2]) * n + tr.states[t]] += 1.0;

    MarkovCheck check;
    for (std::size_t mid = 0; mid < n; ++mid) {
        const double* table = counts.data() + mid * n * n;
        std::vector<double> row_sum(n, 0.0), col_sum(n, 0.0);
        double total = 0;
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = 0; b < n; ++b) {
                row_sum[a] += table[a * n + b];
                col_sum[b] += table[a * n + b];
                total += table[a * n + b];
            }
        const auto rows = std::count_if(row_sum.begin(), row_sum.end(), [](double v) { return v > 0; });
        const auto cols = std::count_if(col_sum.begin(), col_sum.end(), [](double v) { return v > 0; });
        if (rows < 2 || cols < 2) continue;
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = 0; b < n; ++b) {
                if (row_sum[a] == 0 || col_sum[b] == 0) continue;
                const double expected = row_sum[a] * col_sum[b] / total;
                const double diff = table[a * n + b] - expected;
                check.statistic += diff * diff / expected;
            }
        check.degrees_of_freedom += static_cast<std::size_t>((rows - 1) * (cols - 1));
    }
    if (check.degrees_of_freedom > 0) {
        const boost::math::chi_squared dist(static_cast<double>(check.degrees_of_freedom));
        check.p_value = boost::math::cdf(boost::math::complement(dist, check.statistic));
    }
    return check;
}

} // namespace slicemk
