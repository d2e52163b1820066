#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "slicemk/domain.hpp"
#include "slicemk/error.hpp"

using namespace slicemk;

namespace {

ResourceModel single_pool() { return ResourceModel({1.0}, {{0.3}}); }

AllocationState st(std::vector<int> c) { return AllocationState{std::move(c)}; }

std::vector<Request> seq(std::initializer_list<int> qs) {
    std::vector<Request> out;
    for (int q : qs) out.emplace_back(q);
    return out;
}

ErrorKind kind_of(auto&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected slicemk::Error");
    return ErrorKind::Internal;
}

// Full integer box scan: every vector with 0 <= s_n <= floor(min_m r_m / c_mn)
// that passes check_feasible, in lexicographic order.
std::vector<AllocationState> box_scan(const ResourceModel& model) {
    const std::size_t types = model.num_types();
    std::vector<int> bound(types);
    for (std::size_t n = 0; n < types; ++n) {
        double b = 1e18;
        for (std::size_t m = 0; m < model.num_resources(); ++m)
            if (model.cost(m, n) > 0) b = std::min(b, std::floor(model.pool()[m] / model.cost(m, n) + 1e-6));
        bound[n] = static_cast<int>(b);
    }
    std::vector<AllocationState> out;
    AllocationState cur{std::vector<int>(types, 0)};
    for (;;) {
        if (check_feasible(model, cur)) out.push_back(cur);
        // increment with the last type innermost
        std::size_t n = types;
        while (n > 0 && cur.counts[n - 1] == bound[n - 1]) cur.counts[--n] = 0;
        if (n == 0) break;
        ++cur.counts[n - 1];
    }
    return out;
}

// Validity of a raw table over both request signs, raw[2*state + 0] for the
// creation and raw[2*state + 1] for the release decision (single type).
bool raw_table_valid(const AdmissibilityRegion& region, unsigned raw) {
    for (std::size_t i = 0; i < region.size(); ++i) {
        const bool create = (raw >> (2 * i)) & 1U;
        const bool release = (raw >> (2 * i + 1)) & 1U;
        if (!release) return false;
        if (create && !region.contains(st({region.state(i)[0] + 1}))) return false;
    }
    return true;
}

} // namespace

TEST_CASE("check_feasible on the single-resource pool") {
    const auto model = single_pool();
    CHECK(check_feasible(model, st({3})));
    CHECK_FALSE(check_feasible(model, st({4})));
    CHECK(check_feasible(model, st({0})));
    CHECK(kind_of([&] { (void)check_feasible(model, st({1, 1})); }) == ErrorKind::Argument);
}

TEST_CASE("boundary allocations survive rounding") {
    // 0.1 * 10 accumulates to 0.9999999999999999; 3 * (1/3) similar.
    CHECK(check_feasible(ResourceModel({1.0}, {{0.1}}), st({10})));
    CHECK(check_feasible(ResourceModel({0.9}, {{0.3}}), st({3})));
    CHECK(enumerate_region(ResourceModel({0.9}, {{0.3}})).size() == 4);
}

TEST_CASE("model construction rejects degenerate input") {
    CHECK(kind_of([] { ResourceModel({1.0}, {{0.0}}); }) == ErrorKind::Model);
    CHECK(kind_of([] { ResourceModel({1.0, 1.0}, {{0.5, 0.0}, {0.5, 0.0}}); }) == ErrorKind::Model);
    CHECK(kind_of([] { ResourceModel({-1.0}, {{0.3}}); }) == ErrorKind::Model);
    CHECK(kind_of([] { ResourceModel({NAN}, {{0.3}}); }) == ErrorKind::Model);
    CHECK(kind_of([] { ResourceModel({1.0}, {{0.3}, {0.2}}); }) == ErrorKind::Model);
    CHECK(kind_of([] { ResourceModel({1.0}, {{INFINITY}}); }) == ErrorKind::Model);
    // A type that uses only one of two resources is fine.
    CHECK_NOTHROW(ResourceModel({1.0, 1.0}, {{0.5, 0.0}, {0.0, 0.5}}));
}

TEST_CASE("enumerate_region") {
    SUBCASE("single type, cost 0.3") {
        const auto region = enumerate_region(single_pool());
        REQUIRE(region.size() == 4);
        for (int i = 0; i < 4; ++i) CHECK(region.state(static_cast<std::size_t>(i)) == st({i}));
    }
    SUBCASE("empty pool holds only the empty allocation") {
        const auto region = enumerate_region(ResourceModel({0.0}, {{0.3}}));
        REQUIRE(region.size() == 1);
        CHECK(region.state(0) == st({0}));
        CHECK(enumerate_region(ResourceModel({0.0, 0.0}, {{0.3, 1.0}, {0.1, 0.0}})).size() == 1);
    }
    SUBCASE("two types, two resources") {
        const ResourceModel model({1.0, 1.0}, {{0.6, 0.5}, {0.5, 0.6}});
        const auto region = enumerate_region(model);
        CHECK(region.states() == box_scan(model));
        CHECK(region.states() == std::vector<AllocationState>{st({0, 0}), st({0, 1}), st({1, 0})});
    }
}

TEST_CASE("region enumeration equals a full box scan on random models") {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> dim(1, 3);
    std::uniform_real_distribution<double> value(0.0, 1.0);
    std::bernoulli_distribution zero(0.3);
    for (int trial = 0; trial < 200; ++trial) {
        const int resources = dim(rng);
        const int types = dim(rng);
        std::vector<double> pool(static_cast<std::size_t>(resources));
        for (auto& r : pool) r = 2.0 * value(rng);
        std::vector<std::vector<double>> cost(static_cast<std::size_t>(resources),
                                              std::vector<double>(static_cast<std::size_t>(types)));
        for (int n = 0; n < types; ++n) {
            for (int m = 0; m < resources; ++m)
                cost[static_cast<std::size_t>(m)][static_cast<std::size_t>(n)] = zero(rng) ? 0.0 : 0.15 + value(rng);
            cost[0][static_cast<std::size_t>(n)] += 0.15;  // at least one positive cost per type
        }
        const ResourceModel model(pool, cost);
        const auto region = enumerate_region(model);
        CAPTURE(trial);
        REQUIRE(region.states() == box_scan(model));
        CHECK(region.contains(AllocationState{std::vector<int>(static_cast<std::size_t>(types), 0)}));
        CHECK(std::is_sorted(region.states().begin(), region.states().end()));
        for (std::size_t i = 0; i < region.size(); ++i) CHECK(region.index_of(region.state(i)) == i);
    }
}

TEST_CASE("apply_request") {
    CHECK(apply_request(st({2}), Request(-1), Decision::Accept) == st({1}));
    CHECK(apply_request(st({2}), Request(+1), Decision::Decline) == st({2}));
    CHECK(apply_request(st({0, 3}), Request(+1), Decision::Accept) == st({1, 3}));
    CHECK(apply_request(st({0, 3}), Request(-2), Decision::Accept) == st({0, 2}));
    CHECK(kind_of([] { (void)apply_request(st({0}), Request(-1), Decision::Accept); }) == ErrorKind::Argument);
    CHECK(kind_of([] { (void)apply_request(st({0}), Request(2), Decision::Accept); }) == ErrorKind::Argument);
    CHECK(kind_of([] { Request(0); }) == ErrorKind::Argument);
}

TEST_CASE("validate_strategy") {
    const auto model = single_pool();
    const auto region = enumerate_region(model);
    CHECK(validate_strategy(model, region, Strategy(4, 1, {true, true, true, false})));
    CHECK_FALSE(validate_strategy(model, region, Strategy(4, 1, {true, true, true, true})));
    CHECK(validate_strategy(model, region, Strategy::decline_all(region)));
    CHECK(Strategy::always_accept(region) == Strategy(4, 1, {true, true, true, false}));
    // Releases are accepted by construction in every state.
    const auto s = Strategy::decline_all(region);
    for (std::size_t i = 0; i < region.size(); ++i) CHECK(s.decide(Request(-1), i) == Decision::Accept);
    CHECK(kind_of([&] { (void)validate_strategy(model, region, Strategy(3, 1, {false, false, false})); }) == ErrorKind::Model);

    const ResourceModel two({1.0, 1.0}, {{0.6, 0.5}, {0.5, 0.6}});
    const auto r2 = enumerate_region(two);
    CHECK(validate_strategy(two, r2, Strategy::decline_all(r2)));
    CHECK(validate_strategy(two, r2, Strategy::always_accept(r2)));
}

TEST_CASE("enumerate_valid_strategies") {
    const auto model = single_pool();
    const auto region = enumerate_region(model);
    const auto valid = enumerate_valid_strategies(model, region);
    CHECK(creation_table_count(region) == 16);
    REQUIRE(valid.size() == 8);
    for (std::size_t id = 0; id < valid.size(); ++id) CHECK(valid[id].code() == id);
    CHECK(valid.front() == Strategy::decline_all(region));
    CHECK(valid.back() == Strategy::always_accept(region));
    CHECK(valid.back().table_string() == "1110");

    SUBCASE("raw tables with release decisions give the same count") {
        unsigned raw_valid = 0;
        for (unsigned raw = 0; raw < 256; ++raw) raw_valid += raw_table_valid(region, raw);
        CHECK(raw_valid == valid.size());
    }
    SUBCASE("single-state region") {
        const ResourceModel empty({0.0}, {{0.3}});
        const auto r0 = enumerate_region(empty);
        const auto v0 = enumerate_valid_strategies(empty, r0);
        REQUIRE(v0.size() == 1);
        CHECK(v0.front() == Strategy::decline_all(r0));
    }
    SUBCASE("cap") {
        CHECK(kind_of([&] { (void)enumerate_valid_strategies(model, region, 15); }) == ErrorKind::Guard);
        CHECK(enumerate_valid_strategies(model, region, 16).size() == 8);
        const ResourceModel big({100.0}, {{1.0}});
        CHECK(kind_of([&] { (void)enumerate_valid_strategies(big, enumerate_region(big)); }) == ErrorKind::Guard);
    }
}

TEST_CASE("apply_sequence") {
    const auto model = single_pool();
    const auto region = enumerate_region(model);
    const auto accept = Strategy::always_accept(region);
    CHECK(apply_sequence(region, st({1}), seq({+1, -1}), accept) == st({1}));
    CHECK(apply_sequence(region, st({2}), seq({-1, -1, +1}), accept) == st({1}));
    for (const auto& d : enumerate_valid_strategies(model, region))
        CHECK(apply_sequence(region, st({3}), seq({+1}), d) == st({3}));
    for (const auto& s : region.states()) CHECK(apply_sequence(region, s, {}, accept) == s);
    CHECK(kind_of([&] { (void)apply_sequence(region, st({1}), seq({-1, -1}), accept); }) == ErrorKind::Argument);
}

TEST_CASE("final state depends on the order of requests") {
    const auto region = enumerate_region(single_pool());
    const auto accept = Strategy::always_accept(region);
    // From the full state a creation is declined before the release but
    // accepted after it.
    CHECK(apply_sequence(region, st({3}), seq({+1, -1}), accept) == st({2}));
    CHECK(apply_sequence(region, st({3}), seq({-1, +1}), accept) == st({3}));
}

TEST_CASE("valid strategies keep every single step inside the region") {
    const std::vector<ResourceModel> models{single_pool(), ResourceModel({1.0, 1.0}, {{0.6, 0.5}, {0.5, 0.6}}),
                                            ResourceModel({1.0}, {{0.4, 0.3}})};
    for (const auto& model : models) {
        const auto region = enumerate_region(model);
        for (const auto& d : enumerate_valid_strategies(model, region))
            for (std::size_t i = 0; i < region.size(); ++i)
                for (int n = 1; n <= static_cast<int>(model.num_types()); ++n) {
                    const auto& s = region.state(i);
                    CHECK(region.contains(apply_request(s, Request(n), d.decide(Request(n), i))));
                    if (s[static_cast<std::size_t>(n - 1)] > 0)
                        CHECK(region.contains(apply_request(s, Request(-n), d.decide(Request(-n), i))));
                }
    }
}

TEST_CASE("sequence folding under random valid strategies stays in the region") {
    const ResourceModel model({1.0}, {{0.4, 0.3}});
    const auto region = enumerate_region(model);
    const auto valid = enumerate_valid_strategies(model, region);
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<std::size_t> pick_strategy(0, valid.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_state(0, region.size() - 1);
    std::uniform_int_distribution<int> creations(0, 4);
    for (int trial = 0; trial < 500; ++trial) {
        const auto& d = valid[pick_strategy(rng)];
        const auto& s = region.state(pick_state(rng));
        std::vector<Request> q;
        for (std::size_t n = 0; n < s.size(); ++n) {
            const int c = creations(rng);
            for (int k = 0; k < c; ++k) q.emplace_back(static_cast<int>(n) + 1);
            std::uniform_int_distribution<int> releases(0, s[n]);
            const int r = releases(rng);
            for (int k = 0; k < r; ++k) q.emplace_back(-static_cast<int>(n) - 1);
        }
        std::shuffle(q.begin(), q.end(), rng);
        CHECK(region.contains(apply_sequence(region, s, q, d)));
    }
}
