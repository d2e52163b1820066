#include "slicemk/markov.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <unordered_map>

#include "parallel.hpp"
#include "slicemk/error.hpp"

namespace slicemk {

namespace {

constexpr int kNoTransition = -1;

// next[state][kind]: region index reached when a request of that kind is
// decided by the strategy in that state.
std::vector<std::vector<int>> step_table(const AdmissibilityRegion& region, const Strategy& strategy,
                                         const RequestMultiset& shape) {
    std::vector<std::vector<int>> next(region.size(), std::vector<int>(shape.num_kinds(), kNoTransition));
    for (std::size_t i = 0; i < region.size(); ++i) {
        const AllocationState& s = region.state(i);
        for (std::size_t kind = 0; kind < shape.num_kinds(); ++kind) {
            const Request q(shape.kind_request(kind));
            if (q.is_release() && s[q.type_index()] == 0) continue;
            const auto post = region.index_of(apply_request(s, q, strategy.decide(q, i)));
            if (!post) fail(ErrorKind::Model, "strategy leaves the admissibility region from " + label(s));
            next[i][kind] = static_cast<int>(*post);
        }
    }
    return next;
}

// Odometer over all multisets with kind_counts[k] in [0, limit[k]].
template <class Visit>
void for_each_multiset(const std::vector<int>& limit, Visit&& visit) {
    std::vector<int> counts(limit.size(), 0);
    for (;;) {
        visit(counts);
        std::size_t k = 0;
        while (k < counts.size() && counts[k] == limit[k]) counts[k++] = 0;
        if (k == counts.size()) return;
        ++counts[k];
    }
}

std::vector<int> multiset_limits(const AllocationState& s, int q_plus_max) {
    std::vector<int> limit(2 * s.size());
    for (std::size_t n = 0; n < s.size(); ++n) {
        limit[n] = q_plus_max;
        limit[s.size() + n] = s[n];
    }
    return limit;
}

// End-state distribution of a uniformly random ordering of a multiset,
// memoized over (remaining multiset, current state) for one row.
class OrderingRecursion {
public:
    OrderingRecursion(const std::vector<std::vector<int>>& next, std::vector<int> limit)
        : next_(next), states_(next.size()), stride_(limit.size()) {
        std::uint64_t stride = 1;
        for (std::size_t k = 0; k < limit.size(); ++k) {
            stride_[k] = stride;
            stride *= static_cast<std::uint64_t>(limit[k]) + 1;
        }
    }

    // Returns an offset into pool() of a |S|-vector.
    std::size_t end_distribution(std::vector<int>& remaining, std::size_t current) {
        std::uint64_t key = 0;
        int total = 0;
        for (std::size_t k = 0; k < remaining.size(); ++k) {
            key += static_cast<std::uint64_t>(remaining[k]) * stride_[k];
            total += remaining[k];
        }
        return evaluate(remaining, key, total, current);
    }

    [[nodiscard]] std::span<const double> at(std::size_t offset) const {
        return std::span<const double>(pool_).subspan(offset, states_);
    }

private:
    std::size_t evaluate(std::vector<int>& remaining, std::uint64_t key, int total, std::size_t current) {
        const std::uint64_t memo_key = key * states_ + current;
        if (auto it = memo_.find(memo_key); it != memo_.end()) return it->second;

        std::vector<double> dist(states_, 0.0);
        if (total == 0) {
            dist[current] = 1.0;
        } else {
            for (std::size_t kind = 0; kind < remaining.size(); ++kind) {
                if (remaining[kind] == 0) continue;
                const int nxt = next_[current][kind];
                if (nxt == kNoTransition)
                    fail(ErrorKind::Internal, "release requested from a state with no active slice");
                const double weight = static_cast<double>(remaining[kind]) / total;
                --remaining[kind];
                const std::size_t child =
                    evaluate(remaining, key - stride_[kind], total - 1, static_cast<std::size_t>(nxt));
                ++remaining[kind];
                const auto sub = at(child);
                for (std::size_t j = 0; j < states_; ++j) dist[j] += weight * sub[j];
            }
        }
        const std::size_t offset = pool_.size();
        pool_.insert(pool_.end(), dist.begin(), dist.end());
        memo_.emplace(memo_key, offset);
        return offset;
    }

    const std::vector<std::vector<int>>& next_;
    std::size_t states_;
    std::vector<std::uint64_t> stride_;
    std::unordered_map<std::uint64_t, std::size_t> memo_;
    std::vector<double> pool_;
};

void check_inputs(const ResourceModel& model, const AdmissibilityRegion& region, const DemandScenario& scenario,
                  const Strategy& strategy, TruncationConfig trunc) {
    trunc.validate();
    if (region.size() == 0) fail(ErrorKind::Model, "admissibility region is empty");
    scenario.validate(model.num_types());
    if (!validate_strategy(model, region, strategy)) fail(ErrorKind::Model, "strategy is not valid for this region");
}

std::vector<double> kind_pmf(const DemandScenario& scenario, const AllocationState& s, std::size_t kind,
                             int limit, const RequestMultiset& shape) {
    std::vector<double> pmf(static_cast<std::size_t>(limit) + 1);
    for (int k = 0; k <= limit; ++k) pmf[static_cast<std::size_t>(k)] = arrival_pmf(scenario, shape.kind_request(kind), k, s);
    return pmf;
}

double clamp_deficit(double raw) {
    // Ulp-level overshoot of the accumulated row sum reads as zero deficit.
    return raw < 0 ? 0.0 : raw;
}

TransitionMatrix finish(const AdmissibilityRegion& region, std::vector<double> probs, bool renormalize) {
    const std::size_t n = region.size();
    std::vector<double> deficits(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double sum = std::accumulate(probs.begin() + static_cast<std::ptrdiff_t>(i * n),
                                           probs.begin() + static_cast<std::ptrdiff_t>((i + 1) * n), 0.0);
        deficits[i] = clamp_deficit(1.0 - sum);
    }
    TransitionMatrix raw(region, std::move(probs), std::move(deficits), false);
    return renormalize ? raw.renormalize() : raw;
}

} // namespace

void TruncationConfig::validate() const {
    if (q_plus_max < 1) fail(ErrorKind::Config, "q_plus_max must be >= 1");
}

TransitionMatrix::TransitionMatrix(AdmissibilityRegion region, std::vector<double> probs,
                                   std::vector<double> row_deficits, bool renormalized)
    : region_(std::move(region)), probs_(std::move(probs)), deficits_(std::move(row_deficits)),
      renormalized_(renormalized) {
    if (probs_.size() != size() * size() || deficits_.size() != size())
        fail(ErrorKind::Argument, "transition matrix dimensions do not match its region");
}

TransitionMatrix TransitionMatrix::renormalize() const {
    const std::size_t n = size();
    std::vector<double> probs = probs_;
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0;
        for (std::size_t j = 0; j < n; ++j) sum += probs[i * n + j];
        if (sum <= 0) fail(ErrorKind::Model, "row " + std::to_string(i) + " has no probability mass");
        for (std::size_t j = 0; j < n; ++j) probs[i * n + j] /= sum;
    }
    return TransitionMatrix(region_, std::move(probs), deficits_, true);
}

TransitionMatrix build_transition_matrix(const ResourceModel& model, const AdmissibilityRegion& region,
                                         const DemandScenario& scenario, const Strategy& strategy,
                                         TruncationConfig trunc, bool renormalize, unsigned workers) {
    check_inputs(model, region, scenario, strategy, trunc);
    const RequestMultiset shape(model.num_types());
    const auto next = step_table(region, strategy, shape);
    const std::size_t states = region.size();
    std::vector<double> probs(states * states, 0.0);

    detail::parallel_for(states, workers, [&](std::size_t i) {
        const AllocationState& s = region.state(i);
        const auto limit = multiset_limits(s, trunc.q_plus_max);
        std::vector<std::vector<double>> pmf(limit.size());
        for (std::size_t kind = 0; kind < limit.size(); ++kind) pmf[kind] = kind_pmf(scenario, s, kind, limit[kind], shape);

        OrderingRecursion recursion(next, limit);
        double* row = probs.data() + i * states;
        for_each_multiset(limit, [&](std::vector<int>& counts) {
            double mass = 1.0;
            for (std::size_t kind = 0; kind < counts.size(); ++kind) mass *= pmf[kind][static_cast<std::size_t>(counts[kind])];
            auto remaining = counts;
            const auto end = recursion.at(recursion.end_distribution(remaining, i));
            for (std::size_t j = 0; j < states; ++j) row[j] += mass * end[j];
        });
    });
    return finish(region, std::move(probs), renormalize);
}

TransitionMatrix brute_force_transition_matrix(const ResourceModel& model, const AdmissibilityRegion& region,
                                               const DemandScenario& scenario, const Strategy& strategy,
                                               TruncationConfig trunc, bool renormalize, int max_sequence) {
    check_inputs(model, region, scenario, strategy, trunc);
    const std::size_t types = model.num_types();
    int longest = 0;
    for (const auto& s : region.states())
        longest = std::max(longest, static_cast<int>(types) * trunc.q_plus_max + s.total());
    if (longest > max_sequence)
        fail(ErrorKind::Guard, "request sequences of length " + std::to_string(longest) +
                                   " exceed the permutation oracle limit of " + std::to_string(max_sequence));

    const std::size_t states = region.size();
    std::vector<double> probs(states * states, 0.0);
    for (std::size_t i = 0; i < states; ++i) {
        const AllocationState& s = region.state(i);
        for_each_multiset(multiset_limits(s, trunc.q_plus_max), [&](const std::vector<int>& counts) {
            const RequestMultiset qhat(types, counts);
            std::vector<int> order;
            double repetitions = 1;
            for (std::size_t kind = 0; kind < counts.size(); ++kind) {
                for (int c = 1; c <= counts[kind]; ++c) {
                    order.push_back(qhat.kind_request(kind));
                    repetitions *= c;
                }
            }
            std::sort(order.begin(), order.end());
            do {
                std::vector<Request> seq;
                seq.reserve(order.size());
                for (int q : order) seq.emplace_back(q);
                const AllocationState end = apply_sequence(region, s, seq, strategy);
                probs[i * states + region.require_index(end)] += repetitions * sequence_prob(scenario, seq, s);
            } while (std::next_permutation(order.begin(), order.end()));
        });
    }
    return finish(region, std::move(probs), renormalize);
}

double deficit_bound(const DemandScenario& scenario, TruncationConfig trunc) {
    double bound = 0;
    for (double lambda : scenario.creation_rates) bound += creation_tail(lambda, trunc.q_plus_max);
    return bound;
}

StateDistribution step_distribution(const TransitionMatrix& p, std::span<const double> dist) {
    const std::size_t n = p.size();
    if (dist.size() != n) fail(ErrorKind::Argument, "distribution length does not match the matrix");
    StateDistribution out(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (dist[i] == 0) continue;
        const auto row = p.row(i);
        for (std::size_t j = 0; j < n; ++j) out[j] += dist[i] * row[j];
    }
    return out;
}

StateDistribution distribution_after(const TransitionMatrix& p, std::size_t start, int periods) {
    if (!p.renormalized()) fail(ErrorKind::Argument, "multi-step distributions need a renormalized matrix");
    if (start >= p.size()) fail(ErrorKind::Argument, "start state index out of range");
    if (periods < 0) fail(ErrorKind::Argument, "number of periods must be >= 0");
    StateDistribution dist(p.size(), 0.0);
    dist[start] = 1.0;
    for (int t = 0; t < periods; ++t) dist = step_distribution(p, dist);
    return dist;
}

std::vector<CommunicatingClass> communicating_classes(const TransitionMatrix& p) {
    const std::size_t n = p.size();
    std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
    for (std::size_t src = 0; src < n; ++src) {
        std::vector<std::size_t> stack{src};
        reach[src][src] = true;
        while (!stack.empty()) {
            const std::size_t u = stack.back();
            stack.pop_back();
            for (std::size_t v = 0; v < n; ++v)
                if (p(u, v) > 0 && !reach[src][v]) {
                    reach[src][v] = true;
                    stack.push_back(v);
                }
        }
    }
    std::vector<CommunicatingClass> classes;
    std::vector<bool> assigned(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        if (assigned[i]) continue;
        CommunicatingClass cls;
        for (std::size_t j = i; j < n; ++j)
            if (reach[i][j] && reach[j][i]) {
                cls.states.push_back(j);
                assigned[j] = true;
            }
        cls.closed = true;
        for (std::size_t u : cls.states)
            for (std::size_t v = 0; v < n; ++v)
                if (p(u, v) > 0 && !(reach[i][v] && reach[v][i])) cls.closed = false;
        classes.push_back(std::move(cls));
    }
    return classes;
}

StateDistribution stationary_distribution(const TransitionMatrix& p, double tolerance, std::size_t max_iterations) {
    if (!p.renormalized()) fail(ErrorKind::Argument, "stationary distribution needs a renormalized matrix");
    const auto classes = communicating_classes(p);
    const auto closed = std::count_if(classes.begin(), classes.end(), [](const auto& c) { return c.closed; });
    if (closed != 1) {
        std::string listing;
        for (const auto& c : classes) {
            listing += c.closed ? " closed{" : " transient{";
            for (std::size_t k = 0; k < c.states.size(); ++k)
                listing += (k ? "," : "") + std::to_string(c.states[k]);
            listing += "}";
        }
        fail(ErrorKind::Model, "chain has " + std::to_string(closed) +
                                   " closed classes, stationary distribution is not unique:" + listing);
    }

    const std::size_t n = p.size();
    StateDistribution dist(n, 1.0 / static_cast<double>(n));
    for (std::size_t it = 0; it < max_iterations; ++it) {
        StateDistribution next = step_distribution(p, dist);
        double change = 0;
        for (std::size_t j = 0; j < n; ++j) change += std::abs(next[j] - dist[j]);
        dist = std::move(next);
        if (change < tolerance) {
            const double sum = std::accumulate(dist.begin(), dist.end(), 0.0);
            for (double& v : dist) v /= sum;
            return dist;
        }
    }
    fail(ErrorKind::Convergence, "power iteration did not converge in " + std::to_string(max_iterations) +
                                     " iterations");
}

double mean_occupancy(const AdmissibilityRegion& region, std::span<const double> dist, std::size_t type) {
    if (dist.size() != region.size()) fail(ErrorKind::Argument, "distribution length does not match the region");
    double mean = 0;
    for (std::size_t i = 0; i < region.size(); ++i) mean += dist[i] * region.state(i)[type];
    return mean;
}

} // namespace slicemk
