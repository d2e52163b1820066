#include "slicemk/arrival.hpp"

#include <cmath>
#include <string>

#include "slicemk/error.hpp"

namespace slicemk {

namespace {

void require_positive(double v, const char* what) {
    if (!std::isfinite(v) || v <= 0) fail(ErrorKind::Argument, std::string(what) + " must be finite and > 0");
}

double log_factorial(int k) { return std::lgamma(static_cast<double>(k) + 1.0); }

} // namespace

void DemandScenario::validate(std::size_t num_types) const {
    if (creation_rates.size() != num_types || mean_lifetimes.size() != num_types)
        fail(ErrorKind::Config, "scenario must give " + std::to_string(num_types) +
                                    " creation rates and mean lifetimes");
    for (double l : creation_rates)
        if (!std::isfinite(l) || l <= 0) fail(ErrorKind::Config, "creation rates must be finite and > 0");
    for (double m : mean_lifetimes)
        if (!std::isfinite(m) || m <= 0) fail(ErrorKind::Config, "mean lifetimes must be finite and > 0");
}

double release_probability(double mu) {
    require_positive(mu, "mean lifetime");
    return -std::expm1(-1.0 / mu);
}

double creation_pmf(double lambda, int k) {
    require_positive(lambda, "creation rate");
    if (k < 0) fail(ErrorKind::Argument, "arrival count must be >= 0");
    return std::exp(k * std::log(lambda) - lambda - log_factorial(k));
}

double release_pmf(double mu, int s_n, int k) {
    require_positive(mu, "mean lifetime");
    if (s_n < 0 || k < 0) fail(ErrorKind::Argument, "release counts must be >= 0");
    if (k > s_n) fail(ErrorKind::Argument, "cannot release more slices than are active");
    if (s_n == 0) return 1.0;
    const double p = release_probability(mu);
    // log(1 - p) = -1/mu exactly.
    const double log_binom = log_factorial(s_n) - log_factorial(k) - log_factorial(s_n - k);
    return std::exp(log_binom + k * std::log(p) - (s_n - k) / mu);
}

double creation_tail(double lambda, int q_max) {
    require_positive(lambda, "creation rate");
    if (q_max < 0) return 1.0;
    // Summing the tail directly avoids cancellation in 1 - cdf when it is tiny.
    double tail = 0;
    for (int k = q_max + 1;; ++k) {
        const double term = creation_pmf(lambda, k);
        tail += term;
        if (k > lambda && term < 1e-18 * tail) break;
        if (k > q_max + 10000) break;
    }
    return tail;
}

double arrival_pmf(const DemandScenario& scenario, int q, int k, const AllocationState& s) {
    if (q == 0) fail(ErrorKind::Argument, "request type must be nonzero");
    const auto n = static_cast<std::size_t>(q > 0 ? q : -q) - 1;
    if (n >= scenario.num_types() || n >= s.size())
        fail(ErrorKind::Argument, "request type " + std::to_string(q) + " exceeds slice type count");
    if (q > 0) return creation_pmf(scenario.creation_rates[n], k);
    return release_pmf(scenario.mean_lifetimes[n], s[n], k);
}

RequestMultiset::RequestMultiset(std::size_t num_types, std::vector<int> kind_counts)
    : num_types_(num_types), counts_(std::move(kind_counts)) {
    if (counts_.size() != 2 * num_types_) fail(ErrorKind::Argument, "multiset needs 2N kind counts");
    for (int c : counts_)
        if (c < 0) fail(ErrorKind::Argument, "multiset counts must be >= 0");
}

RequestMultiset RequestMultiset::from_sequence(std::size_t num_types, std::span<const Request> seq) {
    RequestMultiset m(num_types);
    for (const Request& q : seq) ++m.counts_.at(m.kind_index(q.signed_type()));
    return m;
}

void RequestMultiset::set(int q, int k) {
    if (k < 0) fail(ErrorKind::Argument, "multiset counts must be >= 0");
    counts_.at(kind_index(q)) = k;
}

int RequestMultiset::total() const noexcept {
    int t = 0;
    for (int c : counts_) t += c;
    return t;
}

std::size_t RequestMultiset::kind_index(int q) const {
    const auto n = static_cast<std::size_t>(q > 0 ? q : -q);
    if (q == 0 || n > num_types_)
        fail(ErrorKind::Argument, "request type " + std::to_string(q) + " outside 1..N");
    return q > 0 ? n - 1 : num_types_ + n - 1;
}

int RequestMultiset::kind_request(std::size_t kind) const {
    if (kind >= counts_.size()) fail(ErrorKind::Argument, "kind index out of range");
    return kind < num_types_ ? static_cast<int>(kind) + 1 : -static_cast<int>(kind - num_types_) - 1;
}

double multiset_prob(const DemandScenario& scenario, const RequestMultiset& qhat, const AllocationState& s) {
    if (qhat.num_types() != s.size()) fail(ErrorKind::Argument, "multiset and state dimensions differ");
    double p = 1.0;
    for (std::size_t kind = 0; kind < qhat.num_kinds(); ++kind) {
        const int q = qhat.kind_request(kind);
        const int k = qhat.count_of_kind(kind);
        if (q < 0 && k > s[static_cast<std::size_t>(-q) - 1])
            fail(ErrorKind::Argument, "multiset releases more type-" + std::to_string(-q) +
                                          " slices than state " + label(s) + " holds");
        p *= arrival_pmf(scenario, q, k, s);
    }
    return p;
}

double sequence_prob(const DemandScenario& scenario, std::span<const Request> qseq, const AllocationState& s) {
    const auto qhat = RequestMultiset::from_sequence(s.size(), qseq);
    const double p = multiset_prob(scenario, qhat, s);
    const auto len = static_cast<int>(qseq.size());
    if (len > 170) return std::exp(std::log(p) - log_factorial(len));
    double factorial = 1;
    for (int k = 2; k <= len; ++k) factorial *= k;
    return p / factorial;
}

} // namespace slicemk
