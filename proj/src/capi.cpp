#include "slicemk/slicemk.h"

#include <cstring>
#include <limits>
#include <memory>
#include <new>
#include <string>

#include "slicemk/error.hpp"
#include "slicemk/experiment.hpp"
#include "slicemk/markov.hpp"
#include "slicemk/simulator.hpp"

using namespace slicemk;

struct sm_model {
    ResourceModel model;
    AdmissibilityRegion region;
};

struct sm_strategy {
    Strategy strategy;
};

struct sm_strategy_list {
    std::vector<sm_strategy> items;
};

struct sm_matrix {
    TransitionMatrix matrix;
};

struct sm_empirical {
    EmpiricalMatrix matrix;
};

struct sm_experiment {
    ExperimentConfig config;
};

namespace {

thread_local std::string last_error;

sm_status to_status(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::Internal: return SM_ERR_INTERNAL;
    case ErrorKind::Config: return SM_ERR_CONFIG;
    case ErrorKind::Model: return SM_ERR_MODEL;
    case ErrorKind::Guard: return SM_ERR_GUARD;
    case ErrorKind::Argument: return SM_ERR_ARGUMENT;
    case ErrorKind::Convergence: return SM_ERR_CONVERGENCE;
    }
    return SM_ERR_INTERNAL;
}

template <class F>
sm_status guarded(F&& body) {
    try {
        body();
        return SM_OK;
    } catch (const Error& e) {
        last_error = e.what();
        return to_status(e.kind());
    } catch (const std::bad_alloc&) {
        last_error = "out of memory";
    } catch (const std::exception& e) {
        last_error = e.what();
    } catch (...) {
        last_error = "unknown error";
    }
    return SM_ERR_INTERNAL;
}

void require(const void* p, const char* what) {
    if (!p) fail(ErrorKind::Argument, std::string(what) + " must not be NULL");
}

DemandScenario scenario_of(const sm_model* m, const double* lambda, const double* mu) {
    require(lambda, "lambda");
    require(mu, "mu");
    const std::size_t n = m->model.num_types();
    DemandScenario sc{std::vector<double>(lambda, lambda + n), std::vector<double>(mu, mu + n)};
    sc.validate(n);
    return sc;
}

AllocationState state_of(const int* counts, std::size_t len) { return AllocationState{std::vector<int>(counts, counts + len)}; }

void copy_out(const std::vector<double>& v, double* out, std::size_t len) {
    require(out, "out");
    if (len < v.size()) fail(ErrorKind::Argument, "output buffer has " + std::to_string(len) + " entries, need " +
                                                      std::to_string(v.size()));
    std::copy(v.begin(), v.end(), out);
}

void copy_string(const std::string& s, char* buf, std::size_t len) {
    require(buf, "buf");
    if (len < s.size() + 1) fail(ErrorKind::Argument, "buffer too small");
    std::memcpy(buf, s.c_str(), s.size() + 1);
}

} // namespace

extern "C" {

const char* sm_last_error(void) { return last_error.c_str(); }

const char* sm_version(void) { return "0.1.0"; }

sm_status sm_creation_pmf(double lambda, int k, double* out) {
    return guarded([&] {
        require(out, "out");
        *out = creation_pmf(lambda, k);
    });
}

sm_status sm_release_pmf(double mu, int active, int k, double* out) {
    return guarded([&] {
        require(out, "out");
        *out = release_pmf(mu, active, k);
    });
}

sm_status sm_model_create(const double* pool, size_t num_resources, const double* cost, size_t num_types,
                          sm_model** out) {
    return guarded([&] {
        require(pool, "pool");
        require(cost, "cost");
        require(out, "out");
        std::vector<std::vector<double>> c(num_resources);
        for (std::size_t m = 0; m < num_resources; ++m) c[m].assign(cost + m * num_types, cost + (m + 1) * num_types);
        ResourceModel model(std::vector<double>(pool, pool + num_resources), std::move(c));
        auto region = enumerate_region(model);
        *out = new sm_model{std::move(model), std::move(region)};
    });
}

void sm_model_destroy(sm_model* model) { delete model; }

size_t sm_model_num_types(const sm_model* model) { return model ? model->model.num_types() : 0; }

size_t sm_region_size(const sm_model* model) { return model ? model->region.size() : 0; }

sm_status sm_region_state(const sm_model* model, size_t index, int* counts, size_t num_types) {
    return guarded([&] {
        require(model, "model");
        require(counts, "counts");
        if (num_types != model->model.num_types()) fail(ErrorKind::Argument, "wrong number of slice types");
        if (index >= model->region.size()) fail(ErrorKind::Argument, "state index out of range");
        const auto& s = model->region.state(index);
        std::copy(s.counts.begin(), s.counts.end(), counts);
    });
}

sm_status sm_region_index(const sm_model* model, const int* counts, size_t num_types, size_t* index) {
    return guarded([&] {
        require(model, "model");
        require(counts, "counts");
        require(index, "index");
        const auto s = state_of(counts, num_types);
        const auto idx = model->region.index_of(s);
        if (!idx) fail(ErrorKind::Argument, "state " + label(s) + " is outside the region");
        *index = *idx;
    });
}

sm_status sm_check_feasible(const sm_model* model, const int* counts, size_t num_types, int* feasible) {
    return guarded([&] {
        require(model, "model");
        require(counts, "counts");
        require(feasible, "feasible");
        *feasible = check_feasible(model->model, state_of(counts, num_types)) ? 1 : 0;
    });
}

sm_status sm_strategy_always_accept(const sm_model* model, sm_strategy** out) {
    return guarded([&] {
        require(model, "model");
        require(out, "out");
        *out = new sm_strategy{Strategy::always_accept(model->region)};
    });
}

sm_status sm_strategy_decline_all(const sm_model* model, sm_strategy** out) {
    return guarded([&] {
        require(model, "model");
        require(out, "out");
        *out = new sm_strategy{Strategy::decline_all(model->region)};
    });
}

sm_status sm_strategy_from_table(const sm_model* model, const unsigned char* accept, size_t len, sm_strategy** out) {
    return guarded([&] {
        require(model, "model");
        require(accept, "accept");
        require(out, "out");
        std::vector<bool> table(len);
        for (std::size_t k = 0; k < len; ++k) table[k] = accept[k] != 0;
        *out = new sm_strategy{Strategy(model->region.size(), model->model.num_types(), std::move(table))};
    });
}

void sm_strategy_destroy(sm_strategy* strategy) { delete strategy; }

sm_status sm_strategy_is_valid(const sm_model* model, const sm_strategy* strategy, int* valid) {
    return guarded([&] {
        require(model, "model");
        require(strategy, "strategy");
        require(valid, "valid");
        *valid = validate_strategy(model->model, model->region, strategy->strategy) ? 1 : 0;
    });
}

sm_status sm_strategy_table(const sm_strategy* strategy, char* buf, size_t len) {
    return guarded([&] {
        require(strategy, "strategy");
        copy_string(strategy->strategy.table_string(), buf, len);
    });
}

sm_status sm_strategy_enumerate(const sm_model* model, uint64_t cap, sm_strategy_list** out) {
    return guarded([&] {
        require(model, "model");
        require(out, "out");
        auto list = std::make_unique<sm_strategy_list>();
        for (auto& s : enumerate_valid_strategies(model->model, model->region, cap ? cap : kDefaultStrategyCap))
            list->items.push_back(sm_strategy{std::move(s)});
        *out = list.release();
    });
}

void sm_strategy_list_destroy(sm_strategy_list* list) { delete list; }

size_t sm_strategy_list_size(const sm_strategy_list* list) { return list ? list->items.size() : 0; }

const sm_strategy* sm_strategy_list_get(const sm_strategy_list* list, size_t index) {
    if (!list || index >= list->items.size()) return nullptr;
    return &list->items[index];
}

sm_status sm_matrix_build(const sm_model* model, const sm_strategy* strategy, const double* lambda, const double* mu,
                          int q_plus_max, int renormalize, unsigned workers, sm_matrix** out) {
    return guarded([&] {
        require(model, "model");
        require(strategy, "strategy");
        require(out, "out");
        auto p = build_transition_matrix(model->model, model->region, scenario_of(model, lambda, mu),
                                         strategy->strategy, TruncationConfig{q_plus_max}, renormalize != 0, workers);
        *out = new sm_matrix{std::move(p)};
    });
}

sm_status sm_matrix_brute_force(const sm_model* model, const sm_strategy* strategy, const double* lambda,
                                const double* mu, int q_plus_max, sm_matrix** out) {
    return guarded([&] {
        require(model, "model");
        require(strategy, "strategy");
        require(out, "out");
        auto p = brute_force_transition_matrix(model->model, model->region, scenario_of(model, lambda, mu),
                                               strategy->strategy, TruncationConfig{q_plus_max});
        *out = new sm_matrix{std::move(p)};
    });
}

void sm_matrix_destroy(sm_matrix* matrix) { delete matrix; }

size_t sm_matrix_size(const sm_matrix* matrix) { return matrix ? matrix->matrix.size() : 0; }

double sm_matrix_get(const sm_matrix* matrix, size_t row, size_t col) {
    if (!matrix || row >= matrix->matrix.size() || col >= matrix->matrix.size()) return std::numeric_limits<double>::quiet_NaN();
    return matrix->matrix(row, col);
}

double sm_matrix_deficit(const sm_matrix* matrix, size_t row) {
    if (!matrix || row >= matrix->matrix.size()) return std::numeric_limits<double>::quiet_NaN();
    return matrix->matrix.row_deficits()[row];
}

int sm_matrix_renormalized(const sm_matrix* matrix) { return matrix && matrix->matrix.renormalized() ? 1 : 0; }

sm_status sm_distribution_after(const sm_matrix* matrix, size_t start, int periods, double* out, size_t len) {
    return guarded([&] {
        require(matrix, "matrix");
        copy_out(distribution_after(matrix->matrix, start, periods), out, len);
    });
}

sm_status sm_stationary_distribution(const sm_matrix* matrix, double* out, size_t len) {
    return guarded([&] {
        require(matrix, "matrix");
        copy_out(stationary_distribution(matrix->matrix), out, len);
    });
}

sm_status sm_simulate(const sm_model* model, const sm_strategy* strategy, const double* lambda, const double* mu,
                      size_t num_runs, size_t periods, uint64_t seed, const int* initial_state, unsigned workers,
                      sm_empirical** out) {
    return guarded([&] {
        require(model, "model");
        require(strategy, "strategy");
        require(out, "out");
        SimConfig cfg;
        cfg.num_runs = num_runs;
        cfg.periods_per_run = periods;
        cfg.seed = seed;
        if (initial_state) cfg.initial_state = state_of(initial_state, model->model.num_types());
        const auto runs = simulate(model->model, model->region, strategy->strategy, scenario_of(model, lambda, mu),
                                   cfg, {}, workers);
        *out = new sm_empirical{estimate_empirical_matrix(runs, model->region.size())};
    });
}

void sm_empirical_destroy(sm_empirical* empirical) { delete empirical; }

double sm_empirical_get(const sm_empirical* empirical, size_t row, size_t col) {
    if (!empirical || row >= empirical->matrix.size() || col >= empirical->matrix.size()) return std::numeric_limits<double>::quiet_NaN();
    return empirical->matrix.prob(row, col);
}

uint64_t sm_empirical_visits(const sm_empirical* empirical, size_t row) {
    if (!empirical || row >= empirical->matrix.size()) return 0;
    return empirical->matrix.visits(row);
}

sm_status sm_rmse(const sm_matrix* analytical, const sm_empirical* empirical, double* out) {
    return guarded([&] {
        require(analytical, "analytical");
        require(empirical, "empirical");
        require(out, "out");
        *out = rmse(analytical->matrix, empirical->matrix).value;
    });
}

sm_status sm_experiment_load_file(const char* path, sm_experiment** out) {
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        *out = new sm_experiment{ExperimentConfig::from_file(path)};
    });
}

sm_status sm_experiment_load_json(const char* text, sm_experiment** out) {
    return guarded([&] {
        require(text, "text");
        require(out, "out");
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(text);
        } catch (const nlohmann::json::parse_error& e) {
            fail(ErrorKind::Config, std::string("config: ") + e.what());
        }
        *out = new sm_experiment{ExperimentConfig::from_json(doc)};
    });
}

sm_status sm_experiment_load_default(sm_experiment** out) {
    return guarded([&] {
        require(out, "out");
        *out = new sm_experiment{ExperimentConfig::defaults()};
    });
}

void sm_experiment_destroy(sm_experiment* experiment) { delete experiment; }

sm_status sm_experiment_set_seed(sm_experiment* experiment, uint64_t seed) {
    return guarded([&] {
        require(experiment, "experiment");
        experiment->config.sim.seed = seed;
    });
}

sm_status sm_experiment_set_renormalize(sm_experiment* experiment, int renormalize) {
    return guarded([&] {
        require(experiment, "experiment");
        experiment->config.renormalize = renormalize != 0;
    });
}

sm_status sm_experiment_set_format(sm_experiment* experiment, const char* format) {
    return guarded([&] {
        require(experiment, "experiment");
        require(format, "format");
        const std::string f = format;
        if (f == "csv") experiment->config.format = OutputFormat::Csv;
        else if (f == "json") experiment->config.format = OutputFormat::Json;
        else fail(ErrorKind::Config, "format must be csv or json");
    });
}

sm_status sm_experiment_config_hash(const sm_experiment* experiment, char* buf, size_t len) {
    return guarded([&] {
        require(experiment, "experiment");
        copy_string(experiment->config.hash(), buf, len);
    });
}

sm_status sm_experiment_run(const sm_experiment* experiment, const char* command, const char* out_dir,
                            unsigned workers) {
    return guarded([&] {
        require(experiment, "experiment");
        require(command, "command");
        RunOptions opts;
        if (out_dir) opts.out_dir = std::filesystem::path(out_dir);
        opts.workers = workers;
        run_command(command, experiment->config, opts);
    });
}

} // extern "C"
