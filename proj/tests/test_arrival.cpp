#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "slicemk/arrival.hpp"
#include "slicemk/error.hpp"

using namespace slicemk;

namespace {

// Frozen with 30-digit mpmath evaluation of the closed forms.
constexpr double kPoisson08k3 = 0.038342738271336242468702070188;   // 0.8^3 e^-0.8 / 3!
constexpr double kRelease4 = 0.221199216928595131754829733022;      // 1 - e^-1/4
constexpr double kRelease4s3k2 = 0.114318049161458184526853243818;  // C(3,2) p^2 e^-1/4
constexpr double kEmptyC = 0.472366552741014707138046550943;        // e^-0.5 e^-0.25
constexpr double kOneEachC = 0.0670820534858093582328764920239;     // 0.5 e^-0.5 (1 - e^-1/4)

const DemandScenario kScenarioC{{0.5}, {4.0}};

// s! (1-e^{-1/mu})^k / (k! (s-k)! e^{(s-k)/mu}) evaluated term by term.
double release_factorial_form(double mu, int s, int k) {
    auto fact = [](int n) { return std::tgamma(n + 1.0); };
    return fact(s) * std::pow(1 - std::exp(-1 / mu), k) / (fact(k) * fact(s - k) * std::exp((s - k) / mu));
}

std::vector<Request> make_seq(std::initializer_list<int> qs) {
    std::vector<Request> out;
    for (int q : qs) out.emplace_back(q);
    return out;
}

} // namespace

TEST_CASE("creation_pmf") {
    CHECK(creation_pmf(0.5, 0) == doctest::Approx(std::exp(-0.5)).epsilon(1e-15));
    CHECK(creation_pmf(1.0, 1) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
    CHECK(creation_pmf(0.8, 3) == doctest::Approx(kPoisson08k3).epsilon(1e-13));
    CHECK(std::isfinite(creation_pmf(0.5, 400)));
    CHECK(creation_pmf(0.5, 400) >= 0);
    CHECK_THROWS_AS((void)creation_pmf(0.5, -1), Error);
    CHECK_THROWS_AS((void)creation_pmf(0.0, 1), Error);
    CHECK_THROWS_AS((void)creation_pmf(-1.0, 1), Error);
}

TEST_CASE("release_pmf") {
    CHECK(release_pmf(4.0, 0, 0) == 1.0);
    CHECK(release_pmf(4.0, 1, 1) == doctest::Approx(kRelease4).epsilon(1e-14));
    CHECK(release_pmf(4.0, 3, 2) == doctest::Approx(kRelease4s3k2).epsilon(1e-13));
    CHECK(release_pmf(4.0, 2, 0) + release_pmf(4.0, 2, 1) + release_pmf(4.0, 2, 2) ==
          doctest::Approx(1.0).epsilon(1e-15));
    CHECK_THROWS_AS((void)release_pmf(4.0, 1, 2), Error);
    CHECK_THROWS_AS((void)release_pmf(4.0, -1, 0), Error);
    CHECK_THROWS_AS((void)release_pmf(0.0, 1, 0), Error);

    SUBCASE("binomial and factorial forms agree") {
        for (double mu : {0.5, 1.0, 4.0, 25.0})
            for (int s = 0; s <= 15; ++s)
                for (int k = 0; k <= s; ++k)
                    CHECK(release_pmf(mu, s, k) == doctest::Approx(release_factorial_form(mu, s, k)).epsilon(1e-12));
    }
}

TEST_CASE("normalization") {
    for (double lambda : {0.1, 0.5, 1.0, 3.0, 20.0}) {
        double sum = 0;
        for (int k = 0; k <= 400; ++k) sum += creation_pmf(lambda, k);
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(creation_tail(lambda, 3) == doctest::Approx(1.0 - (creation_pmf(lambda, 0) + creation_pmf(lambda, 1) +
                                                                 creation_pmf(lambda, 2) + creation_pmf(lambda, 3)))
                                              .epsilon(1e-9));
    }
    for (double mu : {0.3, 4.0, 100.0})
        for (int s = 0; s <= 30; ++s) {
            double sum = 0;
            for (int k = 0; k <= s; ++k) sum += release_pmf(mu, s, k);
            CHECK(std::abs(sum - 1.0) <= 1e-12);
        }
}

TEST_CASE("creation_pmf decays for rates below one") {
    for (double lambda : {0.2, 0.5, 0.8, 0.99})
        for (int k = 1; k < 60; ++k) CHECK(creation_pmf(lambda, k + 1) < creation_pmf(lambda, k));
}

TEST_CASE("arrival_pmf dispatch") {
    CHECK(arrival_pmf(kScenarioC, +1, 0, AllocationState{{2}}) == creation_pmf(0.5, 0));
    CHECK(arrival_pmf(kScenarioC, -1, 0, AllocationState{{0}}) == 1.0);
    CHECK(arrival_pmf(kScenarioC, -1, 2, AllocationState{{3}}) == doctest::Approx(kRelease4s3k2).epsilon(1e-13));
    CHECK_THROWS_AS((void)arrival_pmf(kScenarioC, 2, 0, AllocationState{{0}}), Error);
    CHECK_THROWS_AS((void)arrival_pmf(kScenarioC, -1, 2, AllocationState{{1}}), Error);
}

TEST_CASE("multiset_prob") {
    RequestMultiset empty(1);
    CHECK(multiset_prob(kScenarioC, empty, AllocationState{{1}}) == doctest::Approx(kEmptyC).epsilon(1e-14));
    CHECK(multiset_prob(kScenarioC, empty, AllocationState{{0}}) == doctest::Approx(std::exp(-0.5)).epsilon(1e-15));

    RequestMultiset one_each(1);
    one_each.set(+1, 1);
    one_each.set(-1, 1);
    CHECK(multiset_prob(kScenarioC, one_each, AllocationState{{1}}) == doctest::Approx(kOneEachC).epsilon(1e-13));
    CHECK_THROWS_AS((void)multiset_prob(kScenarioC, one_each, AllocationState{{0}}), Error);
}

TEST_CASE("sequence_prob") {
    const AllocationState s{{1}};
    CHECK(sequence_prob(kScenarioC, {}, s) == doctest::Approx(kEmptyC).epsilon(1e-14));
    const auto a = make_seq({+1, -1});
    const auto b = make_seq({-1, +1});
    CHECK(sequence_prob(kScenarioC, a, s) == sequence_prob(kScenarioC, b, s));
    CHECK(sequence_prob(kScenarioC, a, s) == doctest::Approx(kOneEachC / 2).epsilon(1e-13));
}

TEST_CASE("orderings of a multiset are equiprobable and sum to its probability") {
    const DemandScenario sc{{0.8}, {4.0}};
    for (int start = 0; start <= 3; ++start) {
        const AllocationState s{{start}};
        for (int creations = 0; creations <= 4; ++creations)
            for (int releases = 0; releases <= std::min(start, 4 - creations); ++releases) {
                std::vector<int> order(static_cast<std::size_t>(creations), +1);
                order.insert(order.end(), static_cast<std::size_t>(releases), -1);
                std::sort(order.begin(), order.end());
                std::vector<Request> first;
                for (int q : order) first.emplace_back(q);
                const double reference = sequence_prob(sc, first, s);
                do {
                    std::vector<Request> seq;
                    for (int q : order) seq.emplace_back(q);
                    CHECK(sequence_prob(sc, seq, s) == reference);
                } while (std::next_permutation(order.begin(), order.end()));

                // Q! permutations of positions, repeated kinds included.
                const int total = creations + releases;
                std::vector<int> positions(static_cast<std::size_t>(total));
                std::iota(positions.begin(), positions.end(), 0);
                double sum = 0;
                do {
                    std::vector<Request> seq;
                    for (int p : positions) seq.emplace_back(p < creations ? +1 : -1);
                    sum += sequence_prob(sc, seq, s);
                } while (std::next_permutation(positions.begin(), positions.end()));
                RequestMultiset qhat(1);
                qhat.set(+1, creations);
                qhat.set(-1, releases);
                CHECK(sum == doctest::Approx(multiset_prob(sc, qhat, s)).epsilon(1e-13));
            }
    }
}

TEST_CASE("multiset probabilities sum to one at a fixed state") {
    const DemandScenario sc{{0.5, 1.0}, {4.0, 2.0}};
    const AllocationState s{{2, 1}};
    double sum = 0;
    for (int c1 = 0; c1 <= 60; ++c1)
        for (int c2 = 0; c2 <= 60; ++c2)
            for (int r1 = 0; r1 <= 2; ++r1)
                for (int r2 = 0; r2 <= 1; ++r2) {
                    RequestMultiset q(2, {c1, c2, r1, r2});
                    sum += multiset_prob(sc, q, s);
                }
    CHECK(sum >= 1 - 1e-9);
    CHECK(sum <= 1 + 1e-12);
}

TEST_CASE("RequestMultiset kinds") {
    RequestMultiset m(3);
    CHECK(m.num_kinds() == 6);
    CHECK(m.kind_index(+1) == 0);
    CHECK(m.kind_index(+3) == 2);
    CHECK(m.kind_index(-1) == 3);
    CHECK(m.kind_index(-3) == 5);
    for (std::size_t k = 0; k < 6; ++k) CHECK(m.kind_index(m.kind_request(k)) == k);
    CHECK_THROWS_AS((void)m.kind_index(4), Error);
    CHECK_THROWS_AS((void)m.kind_index(0), Error);
    const auto from = RequestMultiset::from_sequence(3, make_seq({2, -3, 2, 1}));
    CHECK(from.count(2) == 2);
    CHECK(from.count(-3) == 1);
    CHECK(from.total() == 4);
}

TEST_CASE("scenario validation") {
    CHECK_NOTHROW(kScenarioC.validate(1));
    CHECK_THROWS_AS(kScenarioC.validate(2), Error);
    CHECK_THROWS_AS((DemandScenario{{0.0}, {4.0}}.validate(1)), Error);
    CHECK_THROWS_AS((DemandScenario{{0.5}, {-4.0}}.validate(1)), Error);
}
