#pragma once

// Experiment configuration (one JSON document per experiment) and the
// commands behind the slice-markov tool.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "slicemk/arrival.hpp"
#include "slicemk/domain.hpp"
#include "slicemk/simulator.hpp"

namespace slicemk {

enum class OutputFormat { Csv, Json };

struct NamedScenario {
    std::string name;
    DemandScenario demand;
};

/// One entry of the "strategy" config field.
struct StrategySelector {
    enum class Kind { AlwaysAccept, DeclineAll, All, Id, Table };
    Kind kind = Kind::AlwaysAccept;
    std::size_t id = 0;        ///< Kind::Id: position in the valid-strategy listing
    std::vector<bool> table;   ///< Kind::Table: state-major creation decisions
};

struct Figure2Config {
    std::string scenario = "C";
    StrategySelector strategy;
    int q_plus_max = 4;
    std::vector<int> initial_state{0};
    std::size_t episodes = 10000;
    int periods = 10;
};

struct ExperimentConfig {
    std::vector<double> resource_pool;
    std::vector<std::vector<double>> cost_matrix;
    std::vector<NamedScenario> scenarios;
    std::vector<StrategySelector> strategies;
    std::vector<int> q_plus_max;
    bool renormalize = true;
    std::uint64_t strategy_cap = kDefaultStrategyCap;
    SimConfig sim;
    Figure2Config figure2;
    std::string output_dir = "out";
    OutputFormat format = OutputFormat::Csv;

    /// Throws Config errors for missing or mistyped fields.
    static ExperimentConfig from_json(const nlohmann::json& doc);
    static ExperimentConfig from_file(const std::filesystem::path& path);
    /// The bundled configuration: pool [1], cost 0.3, scenarios A/B/C.
    static ExperimentConfig defaults();

    [[nodiscard]] nlohmann::json to_json() const;
    /// FNV-1a of the canonical JSON of every field that affects results
    /// (output location and format excluded), as 16 hex digits.
    [[nodiscard]] std::string hash() const;
    [[nodiscard]] const NamedScenario& scenario(std::string_view name) const;
};

/// Text of the bundled configuration.
[[nodiscard]] std::string_view default_config_text();

/// Model, region and resolved strategies of a config.
struct ResolvedStrategy {
    std::optional<std::size_t> id;  ///< position in the valid listing, when enumerable
    std::string name;
    Strategy strategy;
};

class ExperimentContext {
public:
    explicit ExperimentContext(const ExperimentConfig& config);

    [[nodiscard]] const ExperimentConfig& config() const noexcept { return config_; }
    [[nodiscard]] const ResourceModel& model() const noexcept { return model_; }
    [[nodiscard]] const AdmissibilityRegion& region() const noexcept { return region_; }
    /// Valid strategies; throws a Guard error when the region is too large.
    [[nodiscard]] const std::vector<Strategy>& valid_strategies() const;
    [[nodiscard]] std::vector<ResolvedStrategy> resolve(const std::vector<StrategySelector>& selectors) const;

private:
    ExperimentConfig config_;
    ResourceModel model_;
    AdmissibilityRegion region_;
    std::optional<std::vector<Strategy>> valid_;
};

struct Figure2Row {
    int period;
    std::size_t state;
    double analytical;
    double empirical;
    double standard_error;
};

[[nodiscard]] std::vector<Figure2Row> compute_figure2(const ExperimentContext& ctx, unsigned workers = 0);

struct Figure3Row {
    std::string scenario;
    std::optional<std::size_t> strategy_id;
    std::string strategy_table;
    int q_plus_max;
    double rmse;
    std::size_t excluded_rows;
};

struct Figure3Summary {
    std::string scenario;
    int q_plus_max;
    double mean;
    double variance;  ///< population variance across strategies
    std::size_t strategies;
};

struct Figure3Table {
    std::vector<Figure3Row> rows;
    std::vector<Figure3Summary> summary;
};

/// For every (scenario, strategy) one simulation with cfg.sim, compared
/// against the analytical matrix at every configured q_plus_max.
[[nodiscard]] Figure3Table compute_figure3(const ExperimentContext& ctx, unsigned workers = 0);

struct RunOptions {
    /// Files go here; region and strategies also print to `data`.
    std::optional<std::filesystem::path> out_dir;
    unsigned workers = 0;
    std::ostream* data = nullptr;  ///< defaults to std::cout
    std::ostream* log = nullptr;   ///< defaults to std::cerr
};

inline constexpr std::string_view kCommands[] = {"region", "strategies", "matrix", "simulate", "figure2", "figure3"};

/// Runs one command. Throws slicemk::Error.
void run_command(std::string_view command, const ExperimentConfig& config, const RunOptions& options);

/// Round-trip decimal for doubles.
[[nodiscard]] std::string format_double(double v);

} // namespace slicemk
