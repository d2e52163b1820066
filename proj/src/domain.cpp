#include "slicemk/domain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "slicemk/error.hpp"

namespace slicemk {

namespace {

double slack(double r) { return kFeasibilityTolerance * std::max(1.0, std::abs(r)); }

// Region enumeration refuses boxes larger than this.
constexpr double kMaxBoxSize = 1e8;

} // namespace

ResourceModel::ResourceModel(std::vector<double> pool, std::vector<std::vector<double>> cost)
    : pool_(std::move(pool)), cost_(std::move(cost)) {
    if (pool_.empty()) fail(ErrorKind::Model, "resource pool must have at least one resource");
    if (cost_.size() != pool_.size())
        fail(ErrorKind::Model, "cost matrix has " + std::to_string(cost_.size()) + " rows, expected " +
                                   std::to_string(pool_.size()) + " (one per resource)");
    num_types_ = cost_.front().size();
    if (num_types_ == 0) fail(ErrorKind::Model, "cost matrix must have at least one slice type");
    for (const auto& row : cost_)
        if (row.size() != num_types_) fail(ErrorKind::Model, "cost matrix rows have unequal lengths");

    for (double r : pool_)
        if (!std::isfinite(r) || r < 0) fail(ErrorKind::Model, "resource pool entries must be finite and >= 0");
    for (const auto& row : cost_)
        for (double c : row)
            if (!std::isfinite(c) || c < 0) fail(ErrorKind::Model, "costs must be finite and >= 0");

    for (std::size_t n = 0; n < num_types_; ++n) {
        bool positive = false;
        for (const auto& row : cost_) positive = positive || row[n] > 0;
        if (!positive)
            fail(ErrorKind::Model, "slice type " + std::to_string(n + 1) +
                                       " costs nothing; its admissibility region is unbounded");
    }
}

int ResourceModel::max_count(std::size_t n) const {
    double bound = std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < pool_.size(); ++m) {
        const double c = cost_[m].at(n);
        if (c > 0) bound = std::min(bound, std::floor((pool_[m] + slack(pool_[m])) / c));
    }
    if (bound > std::numeric_limits<int>::max())
        fail(ErrorKind::Guard, "slice type " + std::to_string(n + 1) + " admits too many slices to enumerate");
    return static_cast<int>(bound);
}

int AllocationState::total() const noexcept {
    int t = 0;
    for (int c : counts) t += c;
    return t;
}

std::string label(const AllocationState& s) {
    std::string out = "s=[";
    for (std::size_t n = 0; n < s.size(); ++n) {
        if (n) out += ',';
        out += std::to_string(s[n]);
    }
    out += ']';
    return out;
}

Request::Request(int signed_type) : q_(signed_type) {
    if (signed_type == 0) fail(ErrorKind::Argument, "request type must be nonzero");
}

bool check_feasible(const ResourceModel& model, const AllocationState& s) {
    if (s.size() != model.num_types())
        fail(ErrorKind::Argument, "state has " + std::to_string(s.size()) + " components, model has " +
                                      std::to_string(model.num_types()) + " slice types");
    for (std::size_t m = 0; m < model.num_resources(); ++m) {
        const double r = model.pool()[m];
        double used = 0;
        for (std::size_t n = 0; n < model.num_types(); ++n) {
            if (s[n] < 0) return false;
            used += model.cost(m, n) * s[n];
        }
        if (r - used < -slack(r)) return false;
    }
    return true;
}

AdmissibilityRegion::AdmissibilityRegion(std::size_t num_types, std::vector<AllocationState> states)
    : num_types_(num_types), states_(std::move(states)) {
    for (std::size_t i = 0; i < states_.size(); ++i) {
        if (states_[i].size() != num_types_) fail(ErrorKind::Argument, "region state has wrong dimension");
        if (!index_.emplace(states_[i], i).second)
            fail(ErrorKind::Argument, "duplicate state " + label(states_[i]) + " in region");
    }
}

std::optional<std::size_t> AdmissibilityRegion::index_of(const AllocationState& s) const {
    auto it = index_.find(s);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::size_t AdmissibilityRegion::require_index(const AllocationState& s) const {
    auto idx = index_of(s);
    if (!idx) fail(ErrorKind::Internal, "state " + label(s) + " is outside the admissibility region");
    return *idx;
}

AdmissibilityRegion enumerate_region(const ResourceModel& model) {
    const std::size_t types = model.num_types();
    std::vector<int> bound(types);
    double box = 1;
    for (std::size_t n = 0; n < types; ++n) {
        bound[n] = model.max_count(n);
        box *= bound[n] + 1.0;
    }
    if (box > kMaxBoxSize) fail(ErrorKind::Guard, "admissibility region search box is too large");

    // Depth-first over types in index order yields ascending lexicographic
    // order; infeasible prefixes are pruned because costs are nonnegative.
    std::vector<AllocationState> states;
    AllocationState cur{std::vector<int>(types, 0)};
    auto recurse = [&](auto&& self, std::size_t n) -> void {
        if (n == types) {
            states.push_back(cur);
            return;
        }
        for (int k = 0; k <= bound[n]; ++k) {
            cur.counts[n] = k;
            if (!check_feasible(model, cur)) break;
            self(self, n + 1);
        }
        cur.counts[n] = 0;
    };
    recurse(recurse, 0);
    return AdmissibilityRegion(types, std::move(states));
}

AllocationState apply_request(const AllocationState& pre, Request q, Decision d) {
    const std::size_t n = q.type_index();
    if (n >= pre.size())
        fail(ErrorKind::Argument, "request type " + std::to_string(q.signed_type()) + " exceeds slice type count");
    AllocationState post = pre;
    if (d == Decision::Accept) {
        if (q.is_release() && post.counts[n] == 0)
            fail(ErrorKind::Argument, "release of a type-" + std::to_string(n + 1) + " slice in state " +
                                          label(pre) + " with no active slice of that type");
        post.counts[n] += q.is_creation() ? 1 : -1;
    }
    return post;
}

Strategy::Strategy(std::size_t num_states, std::size_t num_types, std::vector<bool> accept_creation)
    : num_states_(num_states), num_types_(num_types), accept_(std::move(accept_creation)) {
    if (accept_.size() != num_states_ * num_types_)
        fail(ErrorKind::Model, "strategy table has " + std::to_string(accept_.size()) + " entries, expected " +
                                   std::to_string(num_states_ * num_types_));
}

Strategy Strategy::from_code(std::size_t num_states, std::size_t num_types, std::uint64_t code) {
    const std::size_t bits = num_states * num_types;
    if (bits > 64) fail(ErrorKind::Guard, "strategy table too large for an integer code");
    if (bits < 64 && (code >> bits) != 0) fail(ErrorKind::Argument, "strategy code has bits beyond the table");
    std::vector<bool> table(bits);
    for (std::size_t k = 0; k < bits; ++k) table[k] = (code >> k) & 1U;
    return Strategy(num_states, num_types, std::move(table));
}

Strategy Strategy::decline_all(const AdmissibilityRegion& region) {
    return Strategy(region.size(), region.num_types(), std::vector<bool>(region.size() * region.num_types()));
}

Strategy Strategy::always_accept(const AdmissibilityRegion& region) {
    const std::size_t types = region.num_types();
    std::vector<bool> table(region.size() * types);
    for (std::size_t i = 0; i < region.size(); ++i)
        for (std::size_t n = 0; n < types; ++n) {
            AllocationState next = region.state(i);
            ++next.counts[n];
            table[i * types + n] = region.contains(next);
        }
    return Strategy(region.size(), types, std::move(table));
}

bool Strategy::accepts_creation(std::size_t state_index, std::size_t type) const {
    if (state_index >= num_states_ || type >= num_types_)
        fail(ErrorKind::Argument, "strategy lookup outside its table");
    return accept_[state_index * num_types_ + type];
}

Decision Strategy::decide(Request q, std::size_t state_index) const {
    if (q.is_release()) {
        if (state_index >= num_states_ || q.type_index() >= num_types_)
            fail(ErrorKind::Argument, "strategy lookup outside its table");
        return Decision::Accept;
    }
    return accepts_creation(state_index, q.type_index()) ? Decision::Accept : Decision::Decline;
}

std::uint64_t Strategy::code() const {
    if (accept_.size() > 64) fail(ErrorKind::Guard, "strategy table too large for an integer code");
    std::uint64_t code = 0;
    for (std::size_t k = 0; k < accept_.size(); ++k)
        if (accept_[k]) code |= std::uint64_t{1} << k;
    return code;
}

std::string Strategy::table_string() const {
    std::string out;
    out.reserve(accept_.size());
    for (bool a : accept_) out += a ? '1' : '0';
    return out;
}

bool validate_strategy(const ResourceModel& model, const AdmissibilityRegion& region, const Strategy& strategy) {
    const std::size_t types = model.num_types();
    if (region.num_types() != types || strategy.num_types() != types || strategy.num_states() != region.size())
        fail(ErrorKind::Model, "strategy is not defined over this region");
    for (std::size_t i = 0; i < region.size(); ++i) {
        const AllocationState& s = region.state(i);
        for (std::size_t n = 0; n < types; ++n) {
            const int q = static_cast<int>(n) + 1;
            if (strategy.decide(Request(-q), i) != Decision::Accept) return false;
            const Decision d = strategy.decide(Request(q), i);
            if (d == Decision::Accept && !region.contains(apply_request(s, Request(q), d))) return false;
        }
    }
    return true;
}

std::uint64_t creation_table_count(const AdmissibilityRegion& region) {
    const std::size_t bits = region.size() * region.num_types();
    if (bits >= 64) return std::numeric_limits<std::uint64_t>::max();
    return std::uint64_t{1} << bits;
}

std::vector<Strategy> enumerate_valid_strategies(const ResourceModel& model, const AdmissibilityRegion& region,
                                                 std::uint64_t cap) {
    const std::size_t bits = region.size() * region.num_types();
    if (bits >= 64 || creation_table_count(region) > cap)
        fail(ErrorKind::Guard, "2^" + std::to_string(bits) + " strategy tables exceed the enumeration cap of " +
                                   std::to_string(cap));
    std::vector<Strategy> valid;
    const std::uint64_t total = creation_table_count(region);
    for (std::uint64_t code = 0; code < total; ++code) {
        Strategy candidate = Strategy::from_code(region.size(), region.num_types(), code);
        if (validate_strategy(model, region, candidate)) valid.push_back(std::move(candidate));
    }
    return valid;
}

AllocationState apply_sequence(const AdmissibilityRegion& region, const AllocationState& s,
                               std::span<const Request> queue, const Strategy& strategy) {
    AllocationState cur = s;
    std::size_t idx = region.require_index(cur);
    for (const Request& q : queue) {
        cur = apply_request(cur, q, strategy.decide(q, idx));
        idx = region.require_index(cur);
    }
    return cur;
}

} // namespace slicemk
