#include "slicemk/experiment.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "slicemk/error.hpp"
#include "slicemk/markov.hpp"

namespace slicemk {

using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& what) { fail(ErrorKind::Config, "config: " + what); }

const json& require(const json& obj, const char* key, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key)) config_error(where + " is missing \"" + key + "\"");
    return obj.at(key);
}

template <class T>
T get_as(const json& v, const std::string& where) {
    try {
        return v.get<T>();
    } catch (const json::exception& e) {
        config_error(where + ": " + e.what());
    }
}

std::size_t get_count(const json& v, const std::string& where) {
    if (!v.is_number_integer() || v.get<long long>() < 0) config_error(where + " must be a nonnegative integer");
    return v.get<std::size_t>();
}

StrategySelector parse_selector(const json& v) {
    StrategySelector sel;
    if (v.is_string()) {
        const auto name = v.get<std::string>();
        if (name == "always-accept") sel.kind = StrategySelector::Kind::AlwaysAccept;
        else if (name == "decline-all") sel.kind = StrategySelector::Kind::DeclineAll;
        else if (name == "all") sel.kind = StrategySelector::Kind::All;
        else config_error("unknown strategy \"" + name + "\"");
    } else if (v.is_number_integer()) {
        sel.kind = StrategySelector::Kind::Id;
        sel.id = get_count(v, "strategy id");
    } else if (v.is_object() && v.contains("table")) {
        sel.kind = StrategySelector::Kind::Table;
        const json& t = v.at("table");
        if (t.is_string()) {
            for (char c : t.get<std::string>()) {
                if (c != '0' && c != '1') config_error("strategy table strings use only '0' and '1'");
                sel.table.push_back(c == '1');
            }
        } else if (t.is_array()) {
            for (const auto& row : t) {
                if (!row.is_array()) config_error("strategy table must be a list of per-state lists");
                for (const auto& bit : row) sel.table.push_back(get_as<int>(bit, "strategy table entry") != 0);
            }
        } else {
            config_error("strategy table must be a string or a list of lists");
        }
    } else {
        config_error("strategy must be a name, an id or {\"table\": ...}");
    }
    return sel;
}

json selector_json(const StrategySelector& sel) {
    using K = StrategySelector::Kind;
    switch (sel.kind) {
    case K::AlwaysAccept: return "always-accept";
    case K::DeclineAll: return "decline-all";
    case K::All: return "all";
    case K::Id: return sel.id;
    case K::Table: {
        std::string bits;
        for (bool b : sel.table) bits += b ? '1' : '0';
        return json{{"table", bits}};
    }
    }
    return nullptr;
}

std::vector<int> parse_int_list(const json& v, const std::string& where) {
    if (v.is_number_integer()) return {v.get<int>()};
    if (!v.is_array()) config_error(where + " must be an integer or a list of integers");
    std::vector<int> out;
    for (const auto& e : v) {
        if (!e.is_number_integer()) config_error(where + " entries must be integers");
        out.push_back(e.get<int>());
    }
    return out;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

std::string file_token(const std::string& s) {
    std::string out;
    for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
    return out;
}

std::string strategy_token(const ResolvedStrategy& st) {
    return st.id ? "s" + std::to_string(*st.id) : "t" + st.strategy.table_string();
}

std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t strategy_stream(const Strategy& s) { return fnv1a(s.table_string()); }

class Writer {
public:
    Writer(std::string command, const ExperimentConfig& cfg, const RunOptions& opts)
        : command_(std::move(command)), cfg_(cfg), opts_(opts) {}

    std::ostream& log() const { return opts_.log ? *opts_.log : std::cerr; }
    std::ostream& data() const { return opts_.data ? *opts_.data : std::cout; }
    bool json_format() const { return cfg_.format == OutputFormat::Json; }
    const char* ext() const { return json_format() ? ".json" : ".csv"; }

    std::string csv_preamble() const {
        return "# slice-markov " + command_ + "\n# config_hash=" + cfg_.hash() +
               "\n# seed=" + std::to_string(cfg_.sim.seed) + "\n";
    }

    json meta() const {
        return json{{"tool", "slice-markov"}, {"command", command_}, {"config_hash", cfg_.hash()},
                    {"seed", cfg_.sim.seed}};
    }

    std::filesystem::path out_dir() const {
        return opts_.out_dir ? *opts_.out_dir : std::filesystem::path(cfg_.output_dir);
    }

    void write_file(const std::string& name, const std::string& content) const {
        const auto dir = out_dir();
        std::error_code ec;
        std::filesystem::create_directories(dir, ec);
        if (ec) fail(ErrorKind::Internal, "cannot create output directory " + dir.string() + ": " + ec.message());
        const auto path = dir / name;
        std::ofstream out(path, std::ios::binary);
        out << content;
        if (!out) fail(ErrorKind::Internal, "cannot write " + path.string());
        log() << "wrote " << path.string() << '\n';
    }

    // Region and strategy listings go to standard output, and to a file
    // when an output directory was given explicitly.
    void listing(const std::string& name, const std::string& content) const {
        data() << content;
        if (opts_.out_dir) write_file(name, content);
    }

private:
    std::string command_;
    const ExperimentConfig& cfg_;
    const RunOptions& opts_;
};

json state_labels(const AdmissibilityRegion& region) {
    json labels = json::array();
    for (const auto& s : region.states()) labels.push_back(label(s));
    return labels;
}

json scenario_json(const NamedScenario& sc) {
    return json{{"name", sc.name}, {"creation_rates", sc.demand.creation_rates},
                {"mean_lifetimes", sc.demand.mean_lifetimes}};
}

json strategy_json(const ResolvedStrategy& st) {
    json j{{"table", st.strategy.table_string()}, {"name", st.name}};
    j["id"] = st.id ? json(*st.id) : json(nullptr);
    return j;
}

std::string matrix_header(const AdmissibilityRegion& region, const char* last) {
    std::string out = "state";
    for (const auto& s : region.states()) out += "," + csv_field(label(s));
    return out + "," + last + "\n";
}

std::string analytical_matrix_text(const Writer& w, const AdmissibilityRegion& region, const NamedScenario& sc,
                                   const ResolvedStrategy& st, int q, const TransitionMatrix& p) {
    const std::size_t n = p.size();
    if (w.json_format()) {
        json entries = json::array();
        for (std::size_t i = 0; i < n; ++i) {
            const auto row = p.row(i);
            entries.push_back(std::vector<double>(row.begin(), row.end()));
        }
        json doc{{"kind", "matrix"},          {"meta", w.meta()},
                 {"matrix_type", "analytical"}, {"states", state_labels(region)},
                 {"scenario", scenario_json(sc)}, {"strategy", strategy_json(st)},
                 {"q_plus_max", q},            {"renormalized", p.renormalized()},
                 {"row_deficits", p.row_deficits()}, {"entries", entries}};
        return doc.dump(2) + "\n";
    }
    std::ostringstream out;
    out << w.csv_preamble() << "# matrix_type=analytical\n# scenario=" << sc.name
        << "\n# strategy=" << strategy_token(st) << " table=" << st.strategy.table_string()
        << "\n# q_plus_max=" << q << "\n# renormalized=" << (p.renormalized() ? "true" : "false") << "\n";
    out << matrix_header(region, "deficit");
    for (std::size_t i = 0; i < n; ++i) {
        out << csv_field(label(region.state(i)));
        for (std::size_t j = 0; j < n; ++j) out << ',' << format_double(p(i, j));
        out << ',' << format_double(p.row_deficits()[i]) << '\n';
    }
    return out.str();
}

std::string empirical_matrix_text(const Writer& w, const AdmissibilityRegion& region, const NamedScenario& sc,
                                  const ResolvedStrategy& st, const EmpiricalMatrix& m) {
    const std::size_t n = m.size();
    if (w.json_format()) {
        json entries = json::array();
        json visits = json::array();
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> row(n);
            for (std::size_t j = 0; j < n; ++j) row[j] = m.prob(i, j);
            entries.push_back(row);
            visits.push_back(m.visits(i));
        }
        json doc{{"kind", "matrix"},          {"meta", w.meta()},
                 {"matrix_type", "empirical"}, {"states", state_labels(region)},
                 {"scenario", scenario_json(sc)}, {"strategy", strategy_json(st)},
                 {"q_plus_max", nullptr},       {"renormalized", true},
                 {"visits", visits},            {"unvisited_rows", m.unvisited_rows()},
                 {"entries", entries}};
        return doc.dump(2) + "\n";
    }
    std::ostringstream out;
    out << w.csv_preamble() << "# matrix_type=empirical\n# scenario=" << sc.name
        << "\n# strategy=" << strategy_token(st) << " table=" << st.strategy.table_string() << "\n";
    out << matrix_header(region, "visits");
    for (std::size_t i = 0; i < n; ++i) {
        out << csv_field(label(region.state(i)));
        for (std::size_t j = 0; j < n; ++j) out << ',' << format_double(m.prob(i, j));
        out << ',' << m.visits(i) << '\n';
    }
    return out.str();
}

void cmd_region(const ExperimentContext& ctx, const Writer& w) {
    const auto& region = ctx.region();
    std::string text;
    if (w.json_format()) {
        json states = json::array();
        for (std::size_t i = 0; i < region.size(); ++i)
            states.push_back(json{{"index", i}, {"label", label(region.state(i))}, {"counts", region.state(i).counts}});
        text = json{{"kind", "region"}, {"meta", w.meta()}, {"num_types", region.num_types()}, {"states", states}}
                   .dump(2) + "\n";
    } else {
        std::ostringstream out;
        out << w.csv_preamble() << "index,label";
        for (std::size_t n = 0; n < region.num_types(); ++n) out << ",type" << n + 1;
        out << '\n';
        for (std::size_t i = 0; i < region.size(); ++i) {
            out << i << ',' << csv_field(label(region.state(i)));
            for (int c : region.state(i).counts) out << ',' << c;
            out << '\n';
        }
        text = out.str();
    }
    w.log() << "region: " << region.size() << " states\n";
    w.listing(std::string("region") + w.ext(), text);
}

std::string strategy_name(const Strategy& s, const AdmissibilityRegion& region) {
    if (s == Strategy::decline_all(region)) return "decline-all";
    if (s == Strategy::always_accept(region)) return "always-accept";
    return "";
}

void cmd_strategies(const ExperimentContext& ctx, const Writer& w) {
    const auto& region = ctx.region();
    const auto& valid = ctx.valid_strategies();
    const std::size_t bits = region.size() * region.num_types();
    w.log() << "strategies: scanned 2^" << bits << " = " << creation_table_count(region)
            << " creation tables (equivalent to 2^" << 2 * bits
            << " raw tables with release decisions fixed to accept); " << valid.size() << " valid\n";
    std::string text;
    if (w.json_format()) {
        json list = json::array();
        for (std::size_t id = 0; id < valid.size(); ++id)
            list.push_back(json{{"id", id}, {"table", valid[id].table_string()},
                                {"name", strategy_name(valid[id], region)}});
        text = json{{"kind", "strategies"},       {"meta", w.meta()},
                    {"num_states", region.size()}, {"num_types", region.num_types()},
                    {"tables_scanned", creation_table_count(region)}, {"strategies", list}}
                   .dump(2) + "\n";
    } else {
        std::ostringstream out;
        out << w.csv_preamble() << "id,table,name\n";
        for (std::size_t id = 0; id < valid.size(); ++id)
            out << id << ',' << valid[id].table_string() << ',' << strategy_name(valid[id], region) << '\n';
        text = out.str();
    }
    w.listing(std::string("strategies") + w.ext(), text);
}

void cmd_matrix(const ExperimentContext& ctx, const Writer& w, unsigned workers) {
    const auto& cfg = ctx.config();
    const auto strategies = ctx.resolve(cfg.strategies);
    for (const auto& sc : cfg.scenarios)
        for (const auto& st : strategies)
            for (int q : cfg.q_plus_max) {
                const auto p = build_transition_matrix(ctx.model(), ctx.region(), sc.demand, st.strategy,
                                                       TruncationConfig{q}, cfg.renormalize, workers);
                w.write_file("matrix_" + file_token(sc.name) + "_" + strategy_token(st) + "_q" + std::to_string(q) +
                                 w.ext(),
                             analytical_matrix_text(w, ctx.region(), sc, st, q, p));
            }
}

void cmd_simulate(const ExperimentContext& ctx, const Writer& w, unsigned workers) {
    const auto& cfg = ctx.config();
    const auto& region = ctx.region();
    const auto strategies = ctx.resolve(cfg.strategies);
    for (std::size_t si = 0; si < cfg.scenarios.size(); ++si) {
        const auto& sc = cfg.scenarios[si];
        for (const auto& st : strategies) {
            const auto runs = simulate(ctx.model(), region, st.strategy, sc.demand, cfg.sim,
                                       {si, strategy_stream(st.strategy)}, workers);
            const std::string stem = file_token(sc.name) + "_" + strategy_token(st);

            std::ostringstream trace;
            trace << w.csv_preamble() << "run,period,state_index,state_label\n";
            for (std::size_t r = 0; r < runs.size(); ++r)
                for (std::size_t t = 0; t < runs[r].states.size(); ++t) {
                    const std::size_t idx = runs[r].states[t];
                    trace << r << ',' << t << ',' << idx << ',' << csv_field(label(region.state(idx))) << '\n';
                }
            w.write_file("trace_" + stem + ".csv", trace.str());

            const auto emp = estimate_empirical_matrix(runs, region.size());
            w.write_file("empirical_" + stem + w.ext(), empirical_matrix_text(w, region, sc, st, emp));
            w.log() << "simulate: scenario " << sc.name << ", " << strategy_token(st) << ": " << emp.total()
                    << " transitions, " << emp.unvisited_rows().size() << " unvisited rows\n";
        }
    }
}

void cmd_figure2(const ExperimentContext& ctx, const Writer& w, unsigned workers) {
    const auto rows = compute_figure2(ctx, workers);
    const auto& region = ctx.region();
    if (w.json_format()) {
        json list = json::array();
        for (const auto& r : rows)
            list.push_back(json{{"period", r.period},         {"state", label(region.state(r.state))},
                                {"analytical", r.analytical}, {"empirical", r.empirical},
                                {"stderr", r.standard_error}});
        json doc{{"kind", "figure2"}, {"meta", w.meta()}, {"rows", list}};
        w.write_file("figure2.json", doc.dump(2) + "\n");
        return;
    }
    std::ostringstream out;
    out << w.csv_preamble() << "period,state,analytical,empirical,stderr\n";
    for (const auto& r : rows)
        out << r.period << ',' << csv_field(label(region.state(r.state))) << ',' << format_double(r.analytical)
            << ',' << format_double(r.empirical) << ',' << format_double(r.standard_error) << '\n';
    w.write_file("figure2.csv", out.str());
}

void cmd_figure3(const ExperimentContext& ctx, const Writer& w, unsigned workers) {
    const auto table = compute_figure3(ctx, workers);
    if (w.json_format()) {
        json rows = json::array();
        for (const auto& r : table.rows) {
            json j{{"scenario", r.scenario},       {"strategy_table", r.strategy_table},
                   {"q_plus_max", r.q_plus_max},   {"rmse", r.rmse},
                   {"excluded_rows", r.excluded_rows}};
            j["strategy_id"] = r.strategy_id ? json(*r.strategy_id) : json(nullptr);
            rows.push_back(j);
        }
        json summary = json::array();
        for (const auto& s : table.summary)
            summary.push_back(json{{"scenario", s.scenario}, {"q_plus_max", s.q_plus_max}, {"mean", s.mean},
                                   {"variance", s.variance}, {"strategies", s.strategies}});
        json doc{{"kind", "figure3"}, {"meta", w.meta()}, {"rows", rows}, {"summary", summary}};
        w.write_file("figure3.json", doc.dump(2) + "\n");
        return;
    }
    std::ostringstream out;
    out << w.csv_preamble() << "scenario,strategy_id,strategy_table,q_plus_max,rmse,excluded_rows\n";
    for (const auto& r : table.rows)
        out << csv_field(r.scenario) << ',' << (r.strategy_id ? std::to_string(*r.strategy_id) : "") << ','
            << r.strategy_table << ',' << r.q_plus_max << ',' << format_double(r.rmse) << ',' << r.excluded_rows
            << '\n';
    w.write_file("figure3.csv", out.str());

    std::ostringstream sum;
    sum << w.csv_preamble() << "scenario,q_plus_max,mean,variance,strategies\n";
    for (const auto& s : table.summary)
        sum << csv_field(s.scenario) << ',' << s.q_plus_max << ',' << format_double(s.mean) << ','
            << format_double(s.variance) << ',' << s.strategies << '\n';
    w.write_file("figure3_summary.csv", sum.str());
}

} // namespace

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

ExperimentConfig ExperimentConfig::from_json(const json& doc) {
    if (!doc.is_object()) config_error("top level must be an object");
    ExperimentConfig cfg;

    const json& model = require(doc, "model", "config");
    cfg.resource_pool = get_as<std::vector<double>>(require(model, "resource_pool", "model"), "resource_pool");
    cfg.cost_matrix = get_as<std::vector<std::vector<double>>>(require(model, "cost_matrix", "model"), "cost_matrix");

    const json& scenarios = require(doc, "scenarios", "config");
    if (!scenarios.is_array() || scenarios.empty()) config_error("scenarios must be a nonempty list");
    for (const auto& s : scenarios) {
        NamedScenario sc;
        sc.name = get_as<std::string>(require(s, "name", "scenario"), "scenario name");
        sc.demand.creation_rates = get_as<std::vector<double>>(require(s, "creation_rates", "scenario " + sc.name),
                                                               "creation_rates");
        sc.demand.mean_lifetimes = get_as<std::vector<double>>(require(s, "mean_lifetimes", "scenario " + sc.name),
                                                               "mean_lifetimes");
        for (const auto& other : cfg.scenarios)
            if (other.name == sc.name) config_error("duplicate scenario name \"" + sc.name + "\"");
        cfg.scenarios.push_back(std::move(sc));
    }

    const json strategy = doc.value("strategy", json("all"));
    if (strategy.is_array()) {
        for (const auto& s : strategy) cfg.strategies.push_back(parse_selector(s));
    } else {
        cfg.strategies.push_back(parse_selector(strategy));
    }
    if (cfg.strategies.empty()) config_error("strategy list is empty");

    cfg.q_plus_max = parse_int_list(doc.value("q_plus_max", json::array({1, 2, 3, 4})), "q_plus_max");
    if (cfg.q_plus_max.empty()) config_error("q_plus_max list is empty");
    for (int q : cfg.q_plus_max)
        if (q < 1) config_error("q_plus_max values must be >= 1");

    if (doc.contains("renormalize")) cfg.renormalize = get_as<bool>(doc.at("renormalize"), "renormalize");
    if (doc.contains("strategy_cap")) cfg.strategy_cap = get_as<std::uint64_t>(doc.at("strategy_cap"), "strategy_cap");

    if (doc.contains("sim")) {
        const json& sim = doc.at("sim");
        if (!sim.is_object()) config_error("sim must be an object");
        if (sim.contains("num_runs")) cfg.sim.num_runs = get_count(sim.at("num_runs"), "sim.num_runs");
        if (sim.contains("periods_per_run"))
            cfg.sim.periods_per_run = get_count(sim.at("periods_per_run"), "sim.periods_per_run");
        if (sim.contains("seed")) cfg.sim.seed = get_as<std::uint64_t>(sim.at("seed"), "sim.seed");
        if (sim.contains("initial_state")) {
            const json& init = sim.at("initial_state");
            if (init.is_string()) {
                if (init.get<std::string>() != "uniform") config_error("sim.initial_state must be \"uniform\" or a state");
            } else {
                cfg.sim.initial_state = AllocationState{get_as<std::vector<int>>(init, "sim.initial_state")};
            }
        }
    }
    if (cfg.sim.num_runs == 0 || cfg.sim.periods_per_run == 0)
        config_error("sim.num_runs and sim.periods_per_run must be > 0");

    if (doc.contains("figure2")) {
        const json& f = doc.at("figure2");
        if (!f.is_object()) config_error("figure2 must be an object");
        auto& f2 = cfg.figure2;
        if (f.contains("scenario")) f2.scenario = get_as<std::string>(f.at("scenario"), "figure2.scenario");
        if (f.contains("strategy")) f2.strategy = parse_selector(f.at("strategy"));
        if (f2.strategy.kind == StrategySelector::Kind::All) config_error("figure2 needs a single strategy");
        if (f.contains("q_plus_max")) f2.q_plus_max = get_as<int>(f.at("q_plus_max"), "figure2.q_plus_max");
        if (f2.q_plus_max < 1) config_error("figure2.q_plus_max must be >= 1");
        if (f.contains("initial_state"))
            f2.initial_state = get_as<std::vector<int>>(f.at("initial_state"), "figure2.initial_state");
        if (f.contains("episodes")) f2.episodes = get_count(f.at("episodes"), "figure2.episodes");
        if (f.contains("periods")) f2.periods = static_cast<int>(get_count(f.at("periods"), "figure2.periods"));
        if (f2.episodes == 0) config_error("figure2.episodes must be > 0");
    } else {
        cfg.figure2.scenario = cfg.scenarios.back().name;
        cfg.figure2.initial_state.assign(cfg.cost_matrix.empty() ? 0 : cfg.cost_matrix.front().size(), 0);
    }

    if (doc.contains("output")) {
        const json& out = doc.at("output");
        if (out.contains("dir")) cfg.output_dir = get_as<std::string>(out.at("dir"), "output.dir");
        if (out.contains("format")) {
            const auto fmt = get_as<std::string>(out.at("format"), "output.format");
            if (fmt == "csv") cfg.format = OutputFormat::Csv;
            else if (fmt == "json") cfg.format = OutputFormat::Json;
            else config_error("output.format must be csv or json");
        }
    }
    return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) config_error("cannot open " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        config_error(path.string() + ": " + e.what());
    }
    return from_json(doc);
}

ExperimentConfig ExperimentConfig::defaults() { return from_json(json::parse(default_config_text())); }

json ExperimentConfig::to_json() const {
    json scen = json::array();
    for (const auto& s : scenarios) scen.push_back(scenario_json(s));
    json strat = json::array();
    for (const auto& s : strategies) strat.push_back(selector_json(s));
    json sim_j{{"num_runs", sim.num_runs}, {"periods_per_run", sim.periods_per_run}, {"seed", sim.seed}};
    sim_j["initial_state"] = sim.initial_state ? json(sim.initial_state->counts) : json("uniform");
    return json{{"model", {{"resource_pool", resource_pool}, {"cost_matrix", cost_matrix}}},
                {"scenarios", scen},
                {"strategy", strat},
                {"q_plus_max", q_plus_max},
                {"renormalize", renormalize},
                {"strategy_cap", strategy_cap},
                {"sim", sim_j},
                {"figure2",
                 {{"scenario", figure2.scenario},
                  {"strategy", selector_json(figure2.strategy)},
                  {"q_plus_max", figure2.q_plus_max},
                  {"initial_state", figure2.initial_state},
                  {"episodes", figure2.episodes},
                  {"periods", figure2.periods}}},
                {"output", {{"dir", output_dir}, {"format", format == OutputFormat::Json ? "json" : "csv"}}}};
}

std::string ExperimentConfig::hash() const {
    json j = to_json();
    j.erase("output");
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(j.dump())));
    return buf;
}

const NamedScenario& ExperimentConfig::scenario(std::string_view name) const {
    for (const auto& s : scenarios)
        if (s.name == name) return s;
    config_error("unknown scenario \"" + std::string(name) + "\"");
}

ExperimentContext::ExperimentContext(const ExperimentConfig& config)
    : config_(config), model_(config.resource_pool, config.cost_matrix), region_(enumerate_region(model_)) {
    for (const auto& sc : config_.scenarios) sc.demand.validate(model_.num_types());
    if (creation_table_count(region_) <= config_.strategy_cap &&
        region_.size() * region_.num_types() < 64)
        valid_ = enumerate_valid_strategies(model_, region_, config_.strategy_cap);
}

const std::vector<Strategy>& ExperimentContext::valid_strategies() const {
    if (!valid_) (void)enumerate_valid_strategies(model_, region_, config_.strategy_cap);  // throws the guard error
    return *valid_;
}

std::vector<ResolvedStrategy> ExperimentContext::resolve(const std::vector<StrategySelector>& selectors) const {
    auto id_of = [&](const Strategy& s) -> std::optional<std::size_t> {
        if (!valid_) return std::nullopt;
        auto it = std::lower_bound(valid_->begin(), valid_->end(), s,
                                   [](const Strategy& a, const Strategy& b) { return a.code() < b.code(); });
        if (it != valid_->end() && *it == s) return static_cast<std::size_t>(it - valid_->begin());
        return std::nullopt;
    };
    auto named = [&](Strategy s, std::string name) {
        auto id = id_of(s);
        return ResolvedStrategy{id, std::move(name), std::move(s)};
    };

    std::vector<ResolvedStrategy> out;
    using K = StrategySelector::Kind;
    for (const auto& sel : selectors) {
        switch (sel.kind) {
        case K::AlwaysAccept: out.push_back(named(Strategy::always_accept(region_), "always-accept")); break;
        case K::DeclineAll: out.push_back(named(Strategy::decline_all(region_), "decline-all")); break;
        case K::All: {
            const auto& valid = valid_strategies();
            for (std::size_t id = 0; id < valid.size(); ++id)
                out.push_back(ResolvedStrategy{id, strategy_name(valid[id], region_), valid[id]});
            break;
        }
        case K::Id: {
            const auto& valid = valid_strategies();
            if (sel.id >= valid.size())
                fail(ErrorKind::Config, "config: strategy id " + std::to_string(sel.id) + " out of range (" +
                                            std::to_string(valid.size()) + " valid strategies)");
            out.push_back(ResolvedStrategy{sel.id, strategy_name(valid[sel.id], region_), valid[sel.id]});
            break;
        }
        case K::Table: {
            if (sel.table.size() != region_.size() * region_.num_types())
                fail(ErrorKind::Config, "config: strategy table has " + std::to_string(sel.table.size()) +
                                            " entries, region needs " +
                                            std::to_string(region_.size() * region_.num_types()));
            Strategy s(region_.size(), region_.num_types(), sel.table);
            if (!validate_strategy(model_, region_, s))
                fail(ErrorKind::Model, "strategy table " + s.table_string() + " is not valid for this region");
            out.push_back(named(std::move(s), ""));
            break;
        }
        }
    }
    return out;
}

std::vector<Figure2Row> compute_figure2(const ExperimentContext& ctx, unsigned workers) {
    const auto& cfg = ctx.config();
    const auto& f2 = cfg.figure2;
    const auto& sc = cfg.scenario(f2.scenario);
    const auto strategies = ctx.resolve({f2.strategy});
    const Strategy& strategy = strategies.front().strategy;
    const AllocationState start{f2.initial_state};
    const auto start_index = ctx.region().index_of(start);
    if (!start_index) config_error("figure2.initial_state " + label(start) + " is outside the region");

    // Multi-step distributions need a stochastic matrix regardless of the
    // renormalize flag.
    const auto p = build_transition_matrix(ctx.model(), ctx.region(), sc.demand, strategy,
                                           TruncationConfig{f2.q_plus_max}, true, workers);
    SimConfig sim;
    sim.num_runs = f2.episodes;
    sim.periods_per_run = static_cast<std::size_t>(f2.periods);
    sim.seed = cfg.sim.seed;
    sim.initial_state = start;
    const auto runs = simulate(ctx.model(), ctx.region(), strategy, sc.demand, sim, {2}, workers);
    const auto empirical = occupancy_by_period(runs, ctx.region().size());

    std::vector<Figure2Row> rows;
    StateDistribution dist(ctx.region().size(), 0.0);
    dist[*start_index] = 1.0;
    const auto episodes = static_cast<double>(f2.episodes);
    for (int t = 0; t <= f2.periods; ++t) {
        if (t > 0) dist = step_distribution(p, dist);
        for (std::size_t j = 0; j < dist.size(); ++j) {
            const double e = empirical[static_cast<std::size_t>(t)][j];
            rows.push_back(Figure2Row{t, j, dist[j], e, std::sqrt(e * (1 - e) / episodes)});
        }
    }
    return rows;
}

Figure3Table compute_figure3(const ExperimentContext& ctx, unsigned workers) {
    const auto& cfg = ctx.config();
    const auto strategies = ctx.resolve(cfg.strategies);
    Figure3Table table;
    for (std::size_t si = 0; si < cfg.scenarios.size(); ++si) {
        const auto& sc = cfg.scenarios[si];
        std::vector<std::vector<double>> by_q(cfg.q_plus_max.size());
        for (const auto& st : strategies) {
            const auto runs = simulate(ctx.model(), ctx.region(), st.strategy, sc.demand, cfg.sim,
                                       {si, strategy_stream(st.strategy)}, workers);
            const auto empirical = estimate_empirical_matrix(runs, ctx.region().size());
            for (std::size_t qi = 0; qi < cfg.q_plus_max.size(); ++qi) {
                const int q = cfg.q_plus_max[qi];
                const auto p = build_transition_matrix(ctx.model(), ctx.region(), sc.demand, st.strategy,
                                                       TruncationConfig{q}, cfg.renormalize, workers);
                const auto err = rmse(p, empirical);
                table.rows.push_back(Figure3Row{sc.name, st.id, st.strategy.table_string(), q, err.value,
                                                err.excluded_rows.size()});
                by_q[qi].push_back(err.value);
            }
        }
        for (std::size_t qi = 0; qi < cfg.q_plus_max.size(); ++qi) {
            const auto& v = by_q[qi];
            double mean = 0;
            for (double e : v) mean += e;
            mean /= static_cast<double>(v.size());
            double var = 0;
            for (double e : v) var += (e - mean) * (e - mean);
            var /= static_cast<double>(v.size());
            table.summary.push_back(Figure3Summary{sc.name, cfg.q_plus_max[qi], mean, var, v.size()});
        }
    }
    return table;
}

void run_command(std::string_view command, const ExperimentConfig& config, const RunOptions& options) {
    if (std::find(std::begin(kCommands), std::end(kCommands), command) == std::end(kCommands))
        fail(ErrorKind::Argument, "unknown command \"" + std::string(command) + "\"");
    const ExperimentContext ctx(config);
    const Writer w(std::string(command), config, options);
    if (command == "region") cmd_region(ctx, w);
    else if (command == "strategies") cmd_strategies(ctx, w);
    else if (command == "matrix") cmd_matrix(ctx, w, options.workers);
    else if (command == "simulate") cmd_simulate(ctx, w, options.workers);
    else if (command == "figure2") cmd_figure2(ctx, w, options.workers);
    else cmd_figure3(ctx, w, options.workers);
}

} // namespace slicemk
