#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "slicemk/error.hpp"
#include "slicemk/simulator.hpp"

using namespace slicemk;

namespace {

const ResourceModel kBaseModel({1.0}, {{0.3}});
const DemandScenario kScenarioA{{1.0}, {4.0}};
const DemandScenario kScenarioC{{0.5}, {4.0}};

Trajectory traj(std::initializer_list<std::size_t> states) { return Trajectory{std::vector<std::size_t>(states)}; }

} // namespace

TEST_CASE("streams are reproducible and distinct") {
    auto a = make_stream(2018, {1, 2});
    auto b = make_stream(2018, {1, 2});
    auto c = make_stream(2018, {2, 1});
    auto d = make_stream(2019, {1, 2});
    const auto x = a();
    CHECK(x == b());
    CHECK(x != c());
    CHECK(x != d());
}

TEST_CASE("creation counts are Poisson with the configured rate") {
    auto rng = make_stream(1, {});
    const AllocationState idle{{0}};
    const ActiveSlices none = spawn_slices(idle, kScenarioC, rng);
    const int periods = 1'000'000;
    long creations = 0;
    long zero_periods = 0;
    for (int t = 0; t < periods; ++t) {
        const auto q = generate_period_queue(idle, kScenarioC, none, rng);
        creations += static_cast<long>(q.size());
        if (q.empty()) ++zero_periods;
        CHECK(std::is_sorted(q.begin(), q.end(), [](const Event& l, const Event& r) { return l.time < r.time; }));
        for (const auto& ev : q) {
            CHECK(ev.request.is_creation());
            CHECK(ev.time >= 0.0);
            CHECK(ev.time < 1.0);
        }
    }
    CHECK(static_cast<double>(creations) / periods == doctest::Approx(0.5).epsilon(0.004));
    CHECK(static_cast<double>(zero_periods) / periods == doctest::Approx(std::exp(-0.5)).epsilon(0.004));
}

TEST_CASE("a fresh slice releases within one period with probability 1 - e^{-1/mu}") {
    auto rng = make_stream(2, {});
    const AllocationState one{{1}};
    const int periods = 1'000'000;
    long released = 0;
    for (int t = 0; t < periods; ++t) {
        const auto active = spawn_slices(one, kScenarioC, rng);
        const auto q = generate_period_queue(one, kScenarioC, active, rng);
        released += std::count_if(q.begin(), q.end(), [](const Event& e) { return e.request.is_release(); });
    }
    const double expected = 1 - std::exp(-0.25);
    CHECK(std::abs(static_cast<double>(released) / periods - expected) <= 0.002);
}

TEST_CASE("episodes stay inside the region") {
    const auto region = enumerate_region(kBaseModel);
    auto rng = make_stream(3, {});
    for (const auto& strategy : enumerate_valid_strategies(kBaseModel, region)) {
        const auto tr = run_episode(kBaseModel, region, strategy, kScenarioA, 1, 500, rng);
        CHECK(tr.states.size() == 501);
        CHECK(tr.states.front() == 1);
        for (std::size_t s : tr.states) CHECK(s < region.size());
    }
}

TEST_CASE("decline-all from idle never moves") {
    const auto region = enumerate_region(kBaseModel);
    auto rng = make_stream(4, {});
    const auto tr = run_episode(kBaseModel, region, Strategy::decline_all(region), kScenarioA, 0, 200, rng);
    CHECK(std::all_of(tr.states.begin(), tr.states.end(), [](std::size_t s) { return s == 0; }));
}

TEST_CASE("decline-all only ever decreases the occupancy") {
    const auto region = enumerate_region(kBaseModel);
    auto rng = make_stream(5, {});
    const auto tr = run_episode(kBaseModel, region, Strategy::decline_all(region), kScenarioA, 3, 200, rng);
    for (std::size_t t = 1; t < tr.states.size(); ++t)
        CHECK(region.state(tr.states[t])[0] <= region.state(tr.states[t - 1])[0]);
}

TEST_CASE("simulate is reproducible and independent of worker count") {
    const auto region = enumerate_region(kBaseModel);
    const auto strategy = Strategy::always_accept(region);
    SimConfig cfg{50, 40, 99, std::nullopt};
    const auto a = simulate(kBaseModel, region, strategy, kScenarioA, cfg, {7}, 1);
    const auto b = simulate(kBaseModel, region, strategy, kScenarioA, cfg, {7}, 4);
    REQUIRE(a.size() == 50);
    for (std::size_t r = 0; r < a.size(); ++r) CHECK(a[r].states == b[r].states);
    cfg.seed = 100;
    const auto c = simulate(kBaseModel, region, strategy, kScenarioA, cfg, {7}, 1);
    bool differs = false;
    for (std::size_t r = 0; r < a.size(); ++r) differs = differs || a[r].states != c[r].states;
    CHECK(differs);
}

TEST_CASE("fixed and uniform initial states") {
    const auto region = enumerate_region(kBaseModel);
    const auto strategy = Strategy::always_accept(region);
    const auto fixed = simulate(kBaseModel, region, strategy, kScenarioC, SimConfig{100, 1, 1, AllocationState{{2}}});
    for (const auto& tr : fixed) CHECK(tr.states.front() == 2);

    const auto uniform = simulate(kBaseModel, region, strategy, kScenarioC, SimConfig{4000, 1, 1, std::nullopt});
    std::vector<int> starts(region.size(), 0);
    for (const auto& tr : uniform) ++starts[tr.states.front()];
    for (int c : starts) CHECK(std::abs(c - 1000) < 120);

    CHECK_THROWS_AS(SimConfig({10, 1, 1, AllocationState{{4}}}).validate(region), Error);
    CHECK_THROWS_AS(SimConfig({0, 1, 1, std::nullopt}).validate(region), Error);
    CHECK_THROWS_AS(SimConfig({1, 0, 1, std::nullopt}).validate(region), Error);
}

TEST_CASE("empirical matrix bookkeeping") {
    const std::vector<Trajectory> single{traj({0, 0, 0})};
    const auto m = estimate_empirical_matrix(single, 4);
    CHECK(m.count(0, 0) == 2);
    CHECK(m.visits(0) == 2);
    CHECK(m.prob(0, 0) == 1.0);
    CHECK(m.total() == 2);
    CHECK(m.unvisited_rows() == std::vector<std::size_t>{1, 2, 3});
    CHECK(m.prob(1, 1) == 0.0);

    const auto region = enumerate_region(kBaseModel);
    const auto runs = simulate(kBaseModel, region, Strategy::always_accept(region), kScenarioA,
                               SimConfig{30, 25, 5, std::nullopt});
    const auto e = estimate_empirical_matrix(runs, region.size());
    CHECK(e.total() == 30 * 25);
    for (std::size_t i = 0; i < region.size(); ++i) {
        if (!e.visited(i)) continue;
        double sum = 0;
        for (std::size_t j = 0; j < region.size(); ++j) sum += e.prob(i, j);
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-15));
    }

    EmpiricalMatrix a(2), b(2);
    a.record(0, 1);
    b.record(0, 1);
    b.record(1, 0);
    a.merge(b);
    CHECK(a.count(0, 1) == 2);
    CHECK(a.visits(1) == 1);
    CHECK_THROWS_AS(a.merge(EmpiricalMatrix(3)), Error);
    CHECK_THROWS_AS(a.record(2, 0), Error);
}

TEST_CASE("rmse") {
    const auto region = enumerate_region(kBaseModel);
    auto matrix_of = [&](std::vector<double> probs) {
        return TransitionMatrix(region, std::move(probs), std::vector<double>(4, 0.0), true);
    };
    std::vector<double> id(16, 0.0);
    for (std::size_t i = 0; i < 4; ++i) id[i * 4 + i] = 1;

    SUBCASE("exact agreement gives zero") {
        const auto r = rmse(matrix_of(id), estimate_empirical_matrix(
                                               std::vector{traj({0, 0}), traj({1, 1, 1}), traj({2, 2}), traj({3, 3})}, 4));
        CHECK(r.value == 0.0);
        CHECK(r.excluded_rows.empty());
    }
    SUBCASE("disjoint supports saturate") {
        // Empirical rows stay put, analytical rows always move: every nonzero entry has relative error 2.
        std::vector<double> shift(16, 0.0);
        for (std::size_t i = 0; i < 4; ++i) shift[i * 4 + (i + 1) % 4] = 1;
        const auto empirical =
            estimate_empirical_matrix(std::vector{traj({0, 0}), traj({1, 1}), traj({2, 2}), traj({3, 3})}, 4);
        CHECK(rmse(matrix_of(shift), empirical).value == doctest::Approx(std::sqrt(8 * 4.0 / 16)).epsilon(1e-15));
    }
    SUBCASE("hand-computed value with an unvisited row") {
        // Row 0 visited 4 times: 3 stay, 1 to state 1. Analytical row 0 = [0.5, 0.5, 0, 0].
        std::vector<double> p(16, 0.0);
        p[0] = 0.5;
        p[1] = 0.5;
        for (std::size_t i = 1; i < 4; ++i) p[i * 4 + i] = 1;
        const auto empirical = estimate_empirical_matrix(std::vector{traj({0, 0, 0, 0, 1}), traj({2, 2})}, 4);
        const auto r = rmse(matrix_of(p), empirical);
        const double e00 = 2 * (0.5 - 0.75) / 1.25;
        const double e01 = 2 * (0.5 - 0.25) / 0.75;
        CHECK(r.value == doctest::Approx(std::sqrt((e00 * e00 + e01 * e01) / 16)).epsilon(1e-14));
        CHECK(r.excluded_rows == std::vector<std::size_t>{1, 3});
    }
    CHECK_THROWS_AS((void)rmse(matrix_of(id), EmpiricalMatrix(3)), Error);
}

TEST_CASE("occupancy_by_period") {
    const auto pmf = occupancy_by_period(std::vector{traj({0, 1}), traj({0, 2}), traj({0, 1}), traj({0, 3})}, 4);
    REQUIRE(pmf.size() == 2);
    CHECK(pmf[0] == std::vector<double>{1, 0, 0, 0});
    CHECK(pmf[1] == std::vector<double>{0, 0.5, 0.25, 0.25});
    CHECK_THROWS_AS((void)occupancy_by_period(std::vector{traj({0, 1}), traj({0})}, 4), Error);
}

TEST_CASE("markov property test") {
    SUBCASE("simulated chain is not rejected") {
        const auto region = enumerate_region(kBaseModel);
        const auto runs = simulate(kBaseModel, region, Strategy::always_accept(region), kScenarioA,
                                   SimConfig{500, 100, 2018, std::nullopt});
        const auto check = markov_property_test(runs, region.size());
        CHECK(check.degrees_of_freedom > 0);
        CHECK(check.p_value >= 0.01);
    }
    SUBCASE("second-order dependence is detected") {
        // 0 1 2 1 0 1 2 1 ...: after state 1 the next state is fixed by the one before.
        std::vector<std::size_t> states;
        for (int k = 0; k < 2000; ++k)
            for (std::size_t s : {0, 1, 2, 1}) states.push_back(s);
        const auto check = markov_property_test(std::vector{Trajectory{states}}, 3);
        CHECK(check.degrees_of_freedom == 1);
        CHECK(check.p_value < 1e-6);
    }
}
