#include "blr/cli.hpp"
#include "blr/bma.hpp"
#include "blr/errors.hpp"
#include "blr/evaluate.hpp"
#include "blr/oracle.hpp"
#include "blr/predict.hpp"
#include "blr/report.hpp"
#include "blr/selection.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <fmt/format.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

namespace blr {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

struct Options {
    std::string patients;
    std::string falls;
    std::string schema;
    std::string out;
    std::string config;
    int stage = 1;
    std::vector<std::string> pool;
    std::vector<std::string> model;
    double v0 = 1000.0;
    double a = 0.001;
    double b = 0.001;
    std::optional<std::uint64_t> seed;
    unsigned threads = 0;
    std::string weight_rule = "normalized";
    std::string loo_unit = "patient";
    std::string mode = "fixed";
    int sigma2_draws = 200;
    int epsilon_draws = 50;
    bool literal_logodds = false;
    bool standardize = false;
    bool keep_single_class_folds = false;
    double tolerance = 0.1;
    int samples = 20000;
    int quad_points = 161;
    bool example = false;
    bool force = false;
    std::size_t top_k = 5;
};

/// Files of one run, written to a scratch directory and renamed into place.
class RunOutput {
public:
    explicit RunOutput(std::string dir) : dir_(std::move(dir)) {}

    void add(const std::string &name, std::string content) { files_[name] = std::move(content); }

    void commit(bool force) const {
        if (dir_.empty()) {
            return;
        }
        const fs::path target(dir_);
        if (fs::exists(target)) {
            if (!force && !(fs::is_directory(target) && fs::is_empty(target))) {
                throw DataError(ErrorCode::InvalidConfig,
                                fmt::format("output directory '{}' exists (use --force to replace it)", dir_));
            }
        }
        const fs::path parent = target.has_parent_path() ? target.parent_path() : fs::path(".");
        fs::create_directories(parent);
        const fs::path scratch = parent / (target.filename().string() + ".partial");
        fs::remove_all(scratch);
        fs::create_directory(scratch);
        for (const auto &[name, content] : files_) {
            std::ofstream f(scratch / name, std::ios::binary);
            f << content;
            if (!f) {
                throw DataError(ErrorCode::MalformedInput, fmt::format("cannot write '{}'", (scratch / name).string()));
            }
        }
        fs::remove_all(target);
        fs::rename(scratch, target);
    }

private:
    std::string dir_;
    std::map<std::string, std::string> files_;
};

PriorSpec prior_of(const Options &o) {
    PriorSpec p{o.v0, o.a, o.b};
    p.validate();
    return p;
}

Stage stage_of(const Options &o) {
    if (o.stage != 1 && o.stage != 2) {
        throw DataError(ErrorCode::InvalidConfig, fmt::format("--stage must be 1 or 2, got {}", o.stage));
    }
    return o.stage == 1 ? Stage::One : Stage::Two;
}

CohortDataset load(const Options &o) {
    if (o.patients.empty() || o.falls.empty() || o.schema.empty()) {
        throw DataError(ErrorCode::InvalidConfig, "--patients, --falls and --schema are required");
    }
    return load_csv(o.patients, o.falls, load_schema(o.schema));
}

std::uint64_t require_seed(const Options &o, const char *command) {
    if (!o.seed) {
        throw DataError(ErrorCode::InvalidConfig, fmt::format("'{}' needs --seed", command));
    }
    return *o.seed;
}

ordered_json inputs_json(const Options &o) {
    return {{"patients", o.patients}, {"falls", o.falls}, {"schema", o.schema}};
}

ordered_json prior_json(const Options &o) {
    return {{"v0", o.v0}, {"a", o.a}, {"b", o.b}};
}

std::string manifest(const std::string &command, const Options &o, ordered_json config) {
    ordered_json j;
    j["tool"] = "blr";
    j["version"] = kVersion;
    j["command"] = command;
    j["seed"] = o.seed ? ordered_json(*o.seed) : ordered_json(nullptr);
    j["config"] = std::move(config);
    return j.dump(2) + "\n";
}

std::vector<std::string> ordered_variables(const CohortDataset &data, std::vector<std::string> vars) {
    for (const auto &v : vars) {
        data.variable(v);
    }
    std::stable_sort(vars.begin(), vars.end(), [&](const auto &x, const auto &y) {
        return data.declaration_index(x) < data.declaration_index(y);
    });
    return vars;
}

int cmd_fit(const Options &o) {
    const auto data = load(o);
    const auto stage = stage_of(o);
    const auto vars = ordered_variables(data, o.model);
    GridSettings grid;
    grid.threads = o.threads;
    const auto fit = fit_model(encode(data, vars, stage, {o.standardize, std::nullopt}), prior_of(o), grid);
    if (!fit.converged) {
        throw NumericError(ErrorCode::NotConverged, "the optimizer did not converge");
    }
    const auto table = format_fit_table(fit);
    std::cout << table;
    RunOutput out(o.out);
    out.add("fit.json", fit_to_json(fit));
    out.add("summary.txt", table);
    out.add("manifest.json", manifest("fit", o,
                                      {{"inputs", inputs_json(o)},
                                       {"stage", o.stage},
                                       {"model", vars},
                                       {"prior", prior_json(o)},
                                       {"standardize", o.standardize}}));
    out.commit(o.force);
    return 0;
}

int cmd_select(const Options &o) {
    const auto data = load(o);
    const auto stage = stage_of(o);
    const auto pool = o.pool.empty() ? default_pool(data, stage) : ordered_variables(data, o.pool);
    SelectionSettings settings;
    settings.prior = prior_of(o);
    settings.encoding.standardize = o.standardize;
    settings.threads = o.threads;
    const auto trace = forward_select(data, pool, stage, settings);
    const auto rule = o.weight_rule == "literal" ? WeightRule::LiteralLmlRatio : WeightRule::NormalizedMarginal;
    const auto ensemble = build_ensemble(trace, rule);
    const auto table = format_top_table(ensemble, pool, o.top_k);
    std::cout << fmt::format("final model: {}\n\n", model_signature(trace.final_model, stage)) << table;
    RunOutput out(o.out);
    out.add("trace.json", trace_to_json(trace));
    out.add("ensemble.json", ensemble_to_json(ensemble, o.top_k));
    out.add("top_models.txt", table);
    out.add("manifest.json", manifest("select", o,
                                      {{"inputs", inputs_json(o)},
                                       {"stage", o.stage},
                                       {"pool", pool},
                                       {"prior", prior_json(o)},
                                       {"weight_rule", o.weight_rule},
                                       {"standardize", o.standardize},
                                       {"top_k", o.top_k}}));
    out.commit(o.force);
    return 0;
}

int cmd_cv(const Options &o) {
    const auto data = load(o);
    const auto stage = stage_of(o);
    LooSettings s;
    s.unit = o.loo_unit == "fall" ? LooUnit::Fall : LooUnit::Patient;
    s.mode = o.mode == "pipeline" ? LooMode::Pipeline : LooMode::FixedModel;
    s.variables = ordered_variables(data, o.model);
    s.pool = o.pool.empty() ? default_pool(data, stage) : ordered_variables(data, o.pool);
    s.weight_rule = o.weight_rule == "literal" ? WeightRule::LiteralLmlRatio : WeightRule::NormalizedMarginal;
    s.prior = prior_of(o);
    s.encoding.standardize = o.standardize;
    s.mc.seed = require_seed(o, "cv");
    s.mc.n_sigma2_draws = o.sigma2_draws;
    s.mc.n_epsilon_draws = o.epsilon_draws;
    s.mc.literal_logodds_mean = o.literal_logodds;
    s.threads = o.threads;
    s.skip_single_class_folds = !o.keep_single_class_folds;
    const auto report = loo_cv(data, stage, s);

    if (report.confusion) {
        const auto &c = *report.confusion;
        std::cout << fmt::format("threshold {:.4f}: accuracy {:.2f}, sensitivity {:.2f}, specificity {:.2f}, "
                                 "AUC {:.3f}\n",
                                 c.threshold, c.accuracy, c.sensitivity, c.specificity, report.roc->auc);
    } else {
        std::cout << "predicted rows contain a single class; no threshold or ROC\n";
    }
    std::cout << fmt::format("{} folds, {} skipped\n", report.n_folds, report.skipped.size());

    RunOutput out(o.out);
    out.add("report.json", eval_to_json(report));
    std::ostringstream loo;
    write_loo_csv(loo, report);
    out.add("loo_predictions.csv", loo.str());
    if (report.roc) {
        std::ostringstream roc;
        write_roc_csv(roc, *report.roc);
        out.add("roc_points.csv", roc.str());
    }
    ordered_json config{{"inputs", inputs_json(o)},
                        {"stage", o.stage},
                        {"mode", o.mode},
                        {"loo_unit", o.loo_unit},
                        {"prior", prior_json(o)},
                        {"standardize", o.standardize},
                        {"mc",
                         {{"sigma2_draws", o.sigma2_draws},
                          {"epsilon_draws", o.epsilon_draws},
                          {"literal_logodds", o.literal_logodds}}},
                        {"keep_single_class_folds", o.keep_single_class_folds}};
    if (s.mode == LooMode::FixedModel) {
        config["model"] = s.variables;
    } else {
        config["pool"] = s.pool;
        config["weight_rule"] = o.weight_rule;
    }
    out.add("manifest.json", manifest("cv", o, config));
    out.commit(o.force);
    return 0;
}

int cmd_simulate(const Options &o) {
    CohortDataset data;
    ordered_json config;
    if (o.example) {
        data = example_cohort(require_seed(o, "simulate --example"));
        config = {{"example", true}};
    } else {
        if (o.config.empty() || o.schema.empty()) {
            throw DataError(ErrorCode::InvalidConfig, "simulate needs --config and --schema (or --example)");
        }
        std::ifstream in(o.config);
        if (!in) {
            throw DataError(ErrorCode::MalformedInput, fmt::format("cannot open '{}'", o.config));
        }
        std::stringstream text;
        text << in.rdbuf();
        auto sim = parse_simulation_config(text.str());
        if (o.seed) {
            sim.seed = *o.seed;
        }
        data = simulate(sim, load_schema(o.schema));
        config = {{"simulation", ordered_json::parse(simulation_config_to_json(sim))}, {"schema", o.schema}};
    }
    const auto summary = summarize(data);
    std::cout << fmt::format("{} patients, {} fallers, {} falls, {} injurious\n", summary.n_patients,
                             summary.n_fallers, summary.n_falls, summary.n_injured);
    RunOutput out(o.out);
    std::ostringstream patients;
    std::ostringstream falls;
    write_patients_csv(data, patients);
    write_falls_csv(data, falls);
    out.add("patients.csv", patients.str());
    out.add("falls.csv", falls.str());
    out.add("schema.json", schema_to_json(data.schema));
    out.add("manifest.json", manifest("simulate", o, config));
    out.commit(o.force);
    return 0;
}

int cmd_verify(const Options &o) {
    const auto data = load(o);
    const auto stage = stage_of(o);
    const auto vars = ordered_variables(data, o.model);
    const auto prior = prior_of(o);
    const auto design = encode(data, vars, stage, {o.standardize, std::nullopt});
    FitResult fit;
    oracle::OracleResult ref;
    if (stage == Stage::One) {
        if (design.cols() > 3) {
            throw DataError(ErrorCode::InvalidConfig, "quadrature verification supports at most 3 coefficients");
        }
        fit = fit_stage1(design, prior);
        ref = oracle::quadrature_lml_stage1(design.x, design.outcome, prior, o.quad_points);
    } else {
        GridSettings grid;
        grid.threads = o.threads;
        fit = fit_stage2(design, prior, grid);
        const auto g = make_grouped_design(design);
        oracle::ImportanceSettings is;
        is.n_samples = o.samples;
        is.seed = require_seed(o, "verify --stage 2");
        ref = oracle::importance_lml(g.x, g.group, design.outcome, prior, fit, is);
    }
    const double discrepancy = std::fabs(fit.lml - ref.value);
    const bool pass = discrepancy <= o.tolerance;
    ordered_json j{{"main_value", fit.lml},          {"oracle_value", ref.value},
                   {"discrepancy", discrepancy},     {"tolerance", o.tolerance},
                   {"pass", pass},                   {"oracle_method", ref.method},
                   {"oracle_error", ref.error_estimate}};
    const auto text = j.dump(2) + "\n";
    std::cout << text;
    RunOutput out(o.out);
    out.add("verify.json", text);
    out.add("manifest.json", manifest("verify", o,
                                      {{"inputs", inputs_json(o)},
                                       {"stage", o.stage},
                                       {"model", vars},
                                       {"prior", prior_json(o)},
                                       {"standardize", o.standardize},
                                       {"tolerance", o.tolerance},
                                       {"samples", o.samples},
                                       {"quad_points", o.quad_points}}));
    out.commit(o.force);
    return pass ? 0 : 1;
}

int cmd_summarize(const Options &o) {
    const auto data = load(o);
    const auto text = summary_to_json(summarize(data));
    std::cout << text;
    RunOutput out(o.out);
    out.add("summary.json", text);
    out.add("manifest.json", manifest("summarize", o, {{"inputs", inputs_json(o)}}));
    out.commit(o.force);
    return 0;
}

void add_data_flags(CLI::App *cmd, Options &o) {
    cmd->add_option("--patients", o.patients, "patients CSV");
    cmd->add_option("--falls", o.falls, "falls CSV");
    cmd->add_option("--schema", o.schema, "covariate schema JSON");
}

void add_model_flags(CLI::App *cmd, Options &o) {
    cmd->add_option("--stage", o.stage, "1: faller vs non-faller, 2: injurious falls")->check(CLI::IsMember({1, 2}));
    cmd->add_option("--prior-v0", o.v0, "prior variance of coefficients");
    cmd->add_option("--prior-a", o.a, "inverse-gamma shape of sigma2");
    cmd->add_option("--prior-b", o.b, "inverse-gamma rate of sigma2");
    cmd->add_flag("--standardize", o.standardize, "center and scale continuous columns");
}

void add_common_flags(CLI::App *cmd, Options &o) {
    cmd->add_option("--seed", o.seed, "random seed");
    cmd->add_option("--threads", o.threads, "worker threads (0: all cores)");
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_flag("--force", o.force, "replace an existing output directory");
}

} // namespace

int run_cli(int argc, const char *const *argv) {
    CLI::App app{"Bayesian logistic regression for fall-risk cohorts"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    Options o;

    auto *fit = app.add_subcommand("fit", "fit one model and report its posterior");
    add_data_flags(fit, o);
    add_model_flags(fit, o);
    add_common_flags(fit, o);
    fit->add_option("--model", o.model, "comma-separated variables")->delimiter(',');

    auto *select = app.add_subcommand("select", "forward selection and model averaging");
    add_data_flags(select, o);
    add_model_flags(select, o);
    add_common_flags(select, o);
    select->add_option("--pool", o.pool, "comma-separated candidate variables")->delimiter(',');
    select->add_option("--weight-rule", o.weight_rule, "model weights")
        ->check(CLI::IsMember({"normalized", "literal"}));
    select->add_option("--top", o.top_k, "models in the summary table");

    auto *cv = app.add_subcommand("cv", "leave-one-out cross-validation");
    add_data_flags(cv, o);
    add_model_flags(cv, o);
    add_common_flags(cv, o);
    cv->add_option("--model", o.model, "comma-separated variables (fixed mode)")->delimiter(',');
    cv->add_option("--pool", o.pool, "comma-separated candidates (pipeline mode)")->delimiter(',');
    cv->add_option("--mode", o.mode, "fixed model or full selection pipeline per fold")
        ->check(CLI::IsMember({"fixed", "pipeline"}));
    cv->add_option("--loo-unit", o.loo_unit, "held-out unit in stage 2")->check(CLI::IsMember({"patient", "fall"}));
    cv->add_option("--weight-rule", o.weight_rule, "model weights")
        ->check(CLI::IsMember({"normalized", "literal"}));
    cv->add_option("--mc-sigma2-draws", o.sigma2_draws, "sigma2 draws per prediction");
    cv->add_option("--mc-epsilon-draws", o.epsilon_draws, "random-intercept draws per sigma2 draw");
    cv->add_flag("--literal-logodds", o.literal_logodds, "average log-odds instead of probabilities");
    cv->add_flag("--keep-single-class-folds", o.keep_single_class_folds, "fit folds whose training outcomes agree");

    auto *sim = app.add_subcommand("simulate", "draw a synthetic cohort");
    add_common_flags(sim, o);
    sim->add_option("--config", o.config, "simulation config JSON");
    sim->add_option("--schema", o.schema, "covariate schema JSON");
    sim->add_flag("--example", o.example, "the bundled example cohort");

    auto *verify = app.add_subcommand("verify", "compare the Laplace marginal likelihood with an oracle");
    add_data_flags(verify, o);
    add_model_flags(verify, o);
    add_common_flags(verify, o);
    verify->add_option("--model", o.model, "comma-separated variables")->delimiter(',');
    verify->add_option("--tolerance", o.tolerance, "allowed discrepancy in nats");
    verify->add_option("--samples", o.samples, "importance samples (stage 2)");
    verify->add_option("--quad-points", o.quad_points, "quadrature points per axis (stage 1)");

    auto *summ = app.add_subcommand("summarize", "cohort counts and per-variable summaries");
    add_data_flags(summ, o);
    add_common_flags(summ, o);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*fit) return cmd_fit(o);
        if (*select) return cmd_select(o);
        if (*cv) return cmd_cv(o);
        if (*sim) return cmd_simulate(o);
        if (*verify) return cmd_verify(o);
        if (*summ) return cmd_summarize(o);
    } catch (const NumericError &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const DataError &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const fs::filesystem_error &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}

} // namespace blr
