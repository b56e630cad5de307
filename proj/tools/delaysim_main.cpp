#include <algorithm>
#include <exception>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include <delaysim/delaysim.hpp>

namespace {

using delaysim::format_double;

/// Model and driver settings shared by every simulating subcommand. The
/// `model` switch decides which coefficients are live: `cubic-delay` uses
/// (a, b, c) with a Brownian driver, `power-delay-jump` uses (theta, q, a)
/// with a compensated compound Poisson driver.
struct ModelOptions {
    std::string model = "cubic-delay";
    double a = -1.0;      // linear drift coefficient (both families)
    double b = 0.1;       // delayed cubic drift coefficient
    double c = 0.1;       // delayed quadratic diffusion coefficient
    double theta = 0.5;   // jump gain scale
    double q = 2.0;       // jump gain power
    double intensity = 1.0;
    std::string marks = "uniform";
    double mark_lo = 0.0;
    double mark_hi = 1.0;
    double mark_mean = 0.0;
    double mark_stddev = 1.0;
    std::vector<double> mark_values;
    std::vector<double> mark_weights;
};

struct SegmentOptions {
    double xi = 0.5;        // segment value at time 0
    double xi_slope = 0.0;  // affine slope over [-delay, 0]
};

void add_model_options(CLI::App& cmd, ModelOptions& m) {
    cmd.add_option("--model", m.model, "Model family")
        ->check(CLI::IsMember({"cubic-delay", "power-delay-jump"}))
        ->capture_default_str();
    cmd.add_option("--a", m.a, "Linear drift coefficient")->capture_default_str();
    cmd.add_option("--b", m.b, "Delayed cubic drift coefficient")->capture_default_str();
    cmd.add_option("--c", m.c, "Delayed quadratic diffusion coefficient")
        ->capture_default_str();
    cmd.add_option("--theta", m.theta, "Jump gain scale")->capture_default_str();
    cmd.add_option("--q", m.q, "Jump gain power (>= 1)")->capture_default_str();
    cmd.add_option("--intensity", m.intensity, "Poisson jump intensity")
        ->capture_default_str();
    cmd.add_option("--marks", m.marks, "Mark distribution")
        ->check(CLI::IsMember({"uniform", "normal", "discrete"}))
        ->capture_default_str();
    cmd.add_option("--mark-lo", m.mark_lo, "Uniform mark lower bound")->capture_default_str();
    cmd.add_option("--mark-hi", m.mark_hi, "Uniform mark upper bound")->capture_default_str();
    cmd.add_option("--mark-mean", m.mark_mean, "Normal mark mean")->capture_default_str();
    cmd.add_option("--mark-stddev", m.mark_stddev, "Normal mark standard deviation")
        ->capture_default_str();
    cmd.add_option("--mark-values", m.mark_values, "Discrete mark atoms")->delimiter(',');
    cmd.add_option("--mark-weights", m.mark_weights, "Discrete mark weights")->delimiter(',');
}

void add_segment_options(CLI::App& cmd, SegmentOptions& s) {
    cmd.add_option("--xi", s.xi, "Initial segment value at time 0")->capture_default_str();
    cmd.add_option("--xi-slope", s.xi_slope, "Affine slope of the segment")
        ->capture_default_str();
}

delaysim::MarkDistribution build_marks(const ModelOptions& m) {
    if (m.marks == "uniform") return delaysim::MarkDistribution::uniform(m.mark_lo, m.mark_hi);
    if (m.marks == "normal")
        return delaysim::MarkDistribution::normal(m.mark_mean, m.mark_stddev);
    return delaysim::MarkDistribution::discrete(m.mark_values, m.mark_weights);
}

std::pair<delaysim::ModelSpec, delaysim::DriverSpec> build_model(const ModelOptions& m) {
    if (m.model == "cubic-delay")
        return {delaysim::cubic_delay_model(m.a, m.b, m.c),
                delaysim::DriverSpec{delaysim::BrownianDriver{}}};
    return {delaysim::power_delay_jump_model(m.theta, m.q, m.a),
            delaysim::DriverSpec{
                delaysim::CompoundPoissonDriver{m.intensity, build_marks(m)}}};
}

delaysim::InitialSegment build_segment(const SegmentOptions& s, double delay) {
    if (s.xi_slope == 0.0) return delaysim::InitialSegment::constant({s.xi});
    return delaysim::InitialSegment::affine({s.xi}, {s.xi_slope}, delay);
}

std::string join_doubles(const std::vector<double>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i > 0) out += ',';
        out += format_double(values[i]);
    }
    return out;
}

std::string join_ints(const std::vector<int>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i > 0) out += ',';
        out += std::to_string(values[i]);
    }
    return out;
}

/// Resolved semantic fields of the model/driver choice; only the live branch
/// ends up in the experiment fingerprint.
void model_fields(const ModelOptions& m, std::map<std::string, std::string>& fields) {
    fields["model"] = m.model;
    fields["a"] = format_double(m.a);
    if (m.model == "cubic-delay") {
        fields["b"] = format_double(m.b);
        fields["c"] = format_double(m.c);
        return;
    }
    fields["theta"] = format_double(m.theta);
    fields["q"] = format_double(m.q);
    fields["intensity"] = format_double(m.intensity);
    fields["marks"] = m.marks;
    if (m.marks == "uniform") {
        fields["mark-lo"] = format_double(m.mark_lo);
        fields["mark-hi"] = format_double(m.mark_hi);
    } else if (m.marks == "normal") {
        fields["mark-mean"] = format_double(m.mark_mean);
        fields["mark-stddev"] = format_double(m.mark_stddev);
    } else {
        fields["mark-values"] = join_doubles(m.mark_values);
        fields["mark-weights"] = join_doubles(m.mark_weights);
    }
}

void segment_fields(const SegmentOptions& s, std::map<std::string, std::string>& fields) {
    fields["xi"] = format_double(s.xi);
    fields["xi-slope"] = format_double(s.xi_slope);
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << text;
    if (!out.flush()) throw std::runtime_error("failed writing " + path);
}

void write_json_file(const std::string& path, const nlohmann::json& doc) {
    write_text_file(path, doc.dump(2) + "\n");
}

void add_config_option(CLI::App& cmd, std::string& path) {
    cmd.add_option("--config", path,
                   "TOML config; flat keys are the long option names, command-line "
                   "flags take precedence");
}

/// Applies `--config FILE` before the real parse: reads the file as flat
/// TOML and appends `--key value...` tokens for every key not already given
/// on the command line. This keeps the precedence command line > config >
/// environment while letting every option live in the file.
std::vector<std::string> expand_config_args(std::vector<std::string> args) {
    std::string path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config") {
            if (i + 1 >= args.size())
                throw std::invalid_argument("--config expects a file path");
            path = args[i + 1];
            break;
        }
        if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
            break;
        }
    }
    if (path.empty()) return args;

    std::ifstream file(path);
    if (!file) throw std::invalid_argument("cannot read config file: " + path);
    std::vector<CLI::ConfigItem> items;
    try {
        items = CLI::ConfigTOML{}.from_config(file);
    } catch (const CLI::Error& e) {
        throw std::invalid_argument("cannot parse config file " + path + ": " + e.what());
    }

    std::set<std::string> given;
    for (const auto& arg : args)
        if (arg.rfind("--", 0) == 0) given.insert(arg.substr(0, arg.find('=')));

    for (const auto& item : items) {
        if (item.name == "++" || item.name == "--") continue;  // section markers
        if (!item.parents.empty())
            throw std::invalid_argument("config file " + path +
                                        ": keys must be flat, found section [" +
                                        item.parents.front() + "]");
        const std::string flag = "--" + item.name;
        if (given.count(flag) > 0) continue;  // explicit flag wins
        args.push_back(flag);
        for (const auto& value : item.inputs) args.push_back(value);
    }
    return args;
}

/// Exit codes: 0 success, 2 for configuration mistakes, 3 when the requested
/// computation fails or a check suite reports violations.
struct RunContext {
    int exit_code = 0;
};

void setup_converge(CLI::App& app, RunContext& ctx) {
    CLI::App* cmd = app.add_subcommand(
        "converge", "Coupled-path convergence rates against a fine reference");
    auto model = std::make_shared<ModelOptions>();
    auto segment = std::make_shared<SegmentOptions>();
    add_model_options(*cmd, *model);
    add_segment_options(*cmd, *segment);

    struct Opts {
        double delay = 1.0;
        double horizon = 2.0;
        std::vector<int> levels = {8, 16, 32, 64};
        int ref_steps = 1024;
        double p = 2.0;
        long paths = 400;
        int batches = 20;
        int workers = 1;
        std::uint64_t seed = 0;
        double rate_theta = 0.0;
        double rate_alpha = 0.0;
        std::string out;
        std::string format = "both";
        std::string config;
    };
    auto opts = std::make_shared<Opts>();
    add_config_option(*cmd, opts->config);
    cmd->add_option("--delay", opts->delay, "Delay tau")->capture_default_str();
    cmd->add_option("--horizon", opts->horizon, "Final time T")->capture_default_str();
    cmd->add_option("--levels", opts->levels, "Steps-per-delay ladder, ascending")
        ->delimiter(',')
        ->capture_default_str();
    cmd->add_option("--ref-steps", opts->ref_steps, "Reference steps per delay")
        ->capture_default_str();
    cmd->add_option("--p", opts->p, "Moment order of the sup error")->capture_default_str();
    cmd->add_option("--paths", opts->paths, "Monte Carlo paths")->capture_default_str();
    cmd->add_option("--batches", opts->batches, "Batches for standard errors")
        ->capture_default_str();
    cmd->add_option("--workers", opts->workers, "Worker threads (result-invariant)")
        ->capture_default_str();
    cmd->add_option("--seed", opts->seed, "RNG seed")
        ->envname("DELAYSIM_SEED")
        ->capture_default_str();
    cmd->add_option("--rate-theta", opts->rate_theta, "Reported jump-rate parameter theta")
        ->capture_default_str();
    cmd->add_option("--rate-alpha", opts->rate_alpha, "Reported jump-rate parameter alpha")
        ->capture_default_str();
    cmd->add_option("--out", opts->out, "Output path prefix (<out>.csv, <out>.json)");
    cmd->add_option("--format", opts->format, "Which artifacts to write")
        ->check(CLI::IsMember({"csv", "json", "both"}))
        ->capture_default_str();

    cmd->callback([model, segment, opts, &ctx] {
        delaysim::ExperimentPlan plan;
        auto [spec, driver] = build_model(*model);
        plan.model = std::move(spec);
        plan.driver = std::move(driver);
        plan.xi = build_segment(*segment, opts->delay);
        plan.delay = opts->delay;
        plan.horizon = opts->horizon;
        plan.levels = opts->levels;
        plan.reference_steps = opts->ref_steps;
        plan.p = opts->p;
        plan.paths = opts->paths;
        plan.batches = opts->batches;
        plan.workers = opts->workers;
        plan.seed = opts->seed;
        plan.rate_theta = opts->rate_theta;
        plan.rate_alpha = opts->rate_alpha;
        delaysim::validate_plan(plan);

        std::map<std::string, std::string> fields;
        fields["command"] = "converge";
        model_fields(*model, fields);
        segment_fields(*segment, fields);
        fields["delay"] = format_double(opts->delay);
        fields["horizon"] = format_double(opts->horizon);
        fields["levels"] = join_ints(opts->levels);
        fields["ref-steps"] = std::to_string(opts->ref_steps);
        fields["p"] = format_double(opts->p);
        fields["paths"] = std::to_string(opts->paths);
        fields["batches"] = std::to_string(opts->batches);
        fields["seed"] = std::to_string(opts->seed);
        fields["rate-theta"] = format_double(opts->rate_theta);
        fields["rate-alpha"] = format_double(opts->rate_alpha);
        const std::string hash = delaysim::config_fingerprint(fields);

        const delaysim::RateReport report = delaysim::run_convergence(plan);
        for (const auto& level : report.levels)
            std::cout << "level " << level.steps_per_delay << " dt "
                      << format_double(level.dt) << " error_root "
                      << format_double(level.error_root) << " stderr "
                      << format_double(level.std_error) << " divergent " << level.divergent
                      << '\n';
        std::cout << "slope " << format_double(report.slope) << " stderr "
                  << format_double(report.slope_stderr) << '\n';
        std::cout << "config " << hash << '\n';
        if (!opts->out.empty()) {
            if (opts->format != "json") {
                std::ostringstream csv;
                delaysim::write_rate_csv(csv, report);
                write_text_file(opts->out + ".csv", csv.str());
                std::cout << "wrote " << opts->out << ".csv\n";
            }
            if (opts->format != "csv") {
                write_json_file(opts->out + ".json", delaysim::rate_summary(report, hash));
                std::cout << "wrote " << opts->out << ".json\n";
            }
        }
        ctx.exit_code = 0;
    });
}

void setup_increments(CLI::App& app, RunContext& ctx) {
    CLI::App* cmd = app.add_subcommand(
        "increments", "One-step moment scaling across a resolution ladder");
    auto model = std::make_shared<ModelOptions>();
    auto segment = std::make_shared<SegmentOptions>();
    add_model_options(*cmd, *model);
    add_segment_options(*cmd, *segment);

    struct Opts {
        double delay = 1.0;
        double horizon = 2.0;
        std::vector<int> levels = {16, 32, 64, 128, 256};
        double p = 2.0;
        long paths = 10000;
        int batches = 20;
        int workers = 1;
        std::uint64_t seed = 0;
        std::string out;
        std::string format = "both";
        std::string config;
    };
    auto opts = std::make_shared<Opts>();
    add_config_option(*cmd, opts->config);
    cmd->add_option("--delay", opts->delay, "Delay tau")->capture_default_str();
    cmd->add_option("--horizon", opts->horizon, "Final time T")->capture_default_str();
    cmd->add_option("--levels", opts->levels, "Steps-per-delay ladder, ascending")
        ->delimiter(',')
        ->capture_default_str();
    cmd->add_option("--p", opts->p, "Moment order (>= 2)")->capture_default_str();
    cmd->add_option("--paths", opts->paths, "Monte Carlo paths")->capture_default_str();
    cmd->add_option("--batches", opts->batches, "Batches for standard errors")
        ->capture_default_str();
    cmd->add_option("--workers", opts->workers, "Worker threads (result-invariant)")
        ->capture_default_str();
    cmd->add_option("--seed", opts->seed, "RNG seed")
        ->envname("DELAYSIM_SEED")
        ->capture_default_str();
    cmd->add_option("--out", opts->out, "Output path prefix (<out>.csv, <out>.json)");
    cmd->add_option("--format", opts->format, "Which artifacts to write")
        ->check(CLI::IsMember({"csv", "json", "both"}))
        ->capture_default_str();

    cmd->callback([model, segment, opts, &ctx] {
        delaysim::IncrementPlan plan;
        auto [spec, driver] = build_model(*model);
        plan.model = std::move(spec);
        plan.driver = std::move(driver);
        plan.xi = build_segment(*segment, opts->delay);
        plan.delay = opts->delay;
        plan.horizon = opts->horizon;
        plan.levels = opts->levels;
        plan.p = opts->p;
        plan.paths = opts->paths;
        plan.batches = opts->batches;
        plan.workers = opts->workers;
        plan.seed = opts->seed;

        std::map<std::string, std::string> fields;
        fields["command"] = "increments";
        model_fields(*model, fields);
        segment_fields(*segment, fields);
        fields["delay"] = format_double(opts->delay);
        fields["horizon"] = format_double(opts->horizon);
        fields["levels"] = join_ints(opts->levels);
        fields["p"] = format_double(opts->p);
        fields["paths"] = std::to_string(opts->paths);
        fields["batches"] = std::to_string(opts->batches);
        fields["seed"] = std::to_string(opts->seed);
        const std::string hash = delaysim::config_fingerprint(fields);

        const delaysim::IncrementReport report = delaysim::run_increment_probe(plan);
        for (const auto& level : report.levels)
            std::cout << "level " << level.steps_per_delay << " dt "
                      << format_double(level.dt) << " moment "
                      << format_double(level.moment) << " stderr "
                      << format_double(level.std_error) << " divergent " << level.divergent
                      << '\n';
        std::cout << "slope " << format_double(report.slope) << " stderr "
                  << format_double(report.slope_stderr) << '\n';
        std::cout << "config " << hash << '\n';
        if (!opts->out.empty()) {
            if (opts->format != "json") {
                std::ostringstream csv;
                delaysim::write_increment_csv(csv, report);
                write_text_file(opts->out + ".csv", csv.str());
                std::cout << "wrote " << opts->out << ".csv\n";
            }
            if (opts->format != "csv") {
                write_json_file(opts->out + ".json",
                               delaysim::increment_summary(report, hash));
                std::cout << "wrote " << opts->out << ".json\n";
            }
        }
        ctx.exit_code = 0;
    });
}

void setup_smoothing_check(CLI::App& app, RunContext& ctx) {
    CLI::App* cmd = app.add_subcommand(
        "smoothing-check", "Property suite for the smoothing pair (psi, phi)");
    struct Opts {
        double delta = 4.0;
        double epsilon = 0.5;
        long samples = 10000;
        std::uint64_t seed = 0;
        std::string out;
        std::string config;
    };
    auto opts = std::make_shared<Opts>();
    add_config_option(*cmd, opts->config);
    cmd->add_option("--delta", opts->delta, "Support ratio (> 1)")->capture_default_str();
    cmd->add_option("--epsilon", opts->epsilon, "Support top (in (0,1))")
        ->capture_default_str();
    cmd->add_option("--samples", opts->samples, "Log-uniform sample count")
        ->capture_default_str();
    cmd->add_option("--seed", opts->seed, "RNG seed")
        ->envname("DELAYSIM_SEED")
        ->capture_default_str();
    cmd->add_option("--out", opts->out, "Output path prefix (<out>.json)");

    cmd->callback([opts, &ctx] {
        const delaysim::SmoothingParams params(opts->delta, opts->epsilon);
        const delaysim::SmoothingReport report =
            delaysim::run_smoothing_check(params, opts->samples, opts->seed);
        std::cout << "delta " << format_double(report.delta) << " epsilon "
                  << format_double(report.epsilon) << " samples " << opts->samples << '\n';
        for (const auto& item : report.items)
            std::cout << item.property << " violation " << format_double(item.max_violation)
                      << " tolerance " << format_double(item.tolerance) << ' '
                      << (item.pass ? "PASS" : "FAIL") << '\n';
        std::cout << "smoothing-check " << (report.pass() ? "PASS" : "FAIL") << '\n';
        if (!opts->out.empty()) {
            write_json_file(opts->out + ".json", delaysim::smoothing_summary(report));
            std::cout << "wrote " << opts->out << ".json\n";
        }
        ctx.exit_code = report.pass() ? 0 : 3;
    });
}

void setup_validate_model(CLI::App& app, RunContext& ctx) {
    CLI::App* cmd = app.add_subcommand(
        "validate-model", "Sampled check of the declared coefficient conditions");
    auto model = std::make_shared<ModelOptions>();
    add_model_options(*cmd, *model);
    struct Opts {
        long trials = 10000;
        std::uint64_t seed = 0;
        std::string out;
        std::string config;
    };
    auto opts = std::make_shared<Opts>();
    add_config_option(*cmd, opts->config);
    cmd->add_option("--trials", opts->trials, "Sampled quadruples")->capture_default_str();
    cmd->add_option("--seed", opts->seed, "RNG seed")
        ->envname("DELAYSIM_SEED")
        ->capture_default_str();
    cmd->add_option("--out", opts->out, "Output path prefix (<out>.json)");

    cmd->callback([model, opts, &ctx] {
        auto [spec, driver] = build_model(*model);
        (void)driver;
        const delaysim::ValidationReport report =
            delaysim::validate_conditions(spec, opts->trials, opts->seed);
        std::cout << "model " << model->model << " trials " << opts->trials << '\n';
        for (const auto& check : report.checks)
            std::cout << check.name << " ratio " << format_double(check.max_ratio) << ' '
                      << (check.pass ? "PASS" : "FAIL") << '\n';
        std::cout << "validate-model " << (report.pass() ? "PASS" : "FAIL") << '\n';
        if (!opts->out.empty()) {
            write_json_file(opts->out + ".json", delaysim::validation_summary(report));
            std::cout << "wrote " << opts->out << ".json\n";
        }
        ctx.exit_code = report.pass() ? 0 : 3;
    });
}

void setup_simulate(CLI::App& app, RunContext& ctx) {
    CLI::App* cmd =
        app.add_subcommand("simulate", "One solution path written as a time series");
    auto model = std::make_shared<ModelOptions>();
    auto segment = std::make_shared<SegmentOptions>();
    add_model_options(*cmd, *model);
    add_segment_options(*cmd, *segment);
    struct Opts {
        double delay = 1.0;
        double horizon = 2.0;
        int steps = 64;
        std::uint64_t seed = 0;
        std::uint32_t path_index = 0;
        std::string out;
        std::string config;
    };
    auto opts = std::make_shared<Opts>();
    add_config_option(*cmd, opts->config);
    cmd->add_option("--delay", opts->delay, "Delay tau")->capture_default_str();
    cmd->add_option("--horizon", opts->horizon, "Final time T")->capture_default_str();
    cmd->add_option("--steps", opts->steps, "Steps per delay")->capture_default_str();
    cmd->add_option("--seed", opts->seed, "RNG seed")
        ->envname("DELAYSIM_SEED")
        ->capture_default_str();
    cmd->add_option("--path-index", opts->path_index, "Path counter within the seed")
        ->capture_default_str();
    cmd->add_option("--out", opts->out, "Output path prefix (<out>.csv)")->required();

    cmd->callback([model, segment, opts, &ctx] {
        const delaysim::TimeGrid grid(opts->delay, opts->horizon, opts->steps);
        auto [spec, driver] = build_model(*model);
        const delaysim::InitialSegment xi = build_segment(*segment, opts->delay);
        const delaysim::PathLattice path = std::visit(
            [&](const auto& d) -> delaysim::PathLattice {
                using D = std::decay_t<decltype(d)>;
                if constexpr (std::is_same_v<D, delaysim::BrownianDriver>) {
                    return em_brownian(spec, xi, grid,
                                       sample_brownian(grid, spec.brownian_dimension,
                                                       {opts->seed, delaysim::streams::brownian,
                                                        opts->path_index}));
                } else {
                    return em_jump(spec, xi, grid,
                                   sample_jumps(grid, d.intensity, d.marks,
                                                {opts->seed, delaysim::streams::jumps,
                                                 opts->path_index}));
                }
            },
            driver);
        std::ostringstream csv;
        delaysim::write_path_csv(csv, path);
        write_text_file(opts->out + ".csv", csv.str());
        std::cout << "simulated " << grid.total_steps() << " steps dt "
                  << format_double(grid.dt()) << '\n';
        std::cout << "wrote " << opts->out << ".csv\n";
        ctx.exit_code = 0;
    });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Euler-Maruyama experiments for stochastic delay equations"};
    app.set_version_flag("--version", delaysim::version_string);
    app.require_subcommand(1);

    RunContext ctx;
    setup_converge(app, ctx);
    setup_increments(app, ctx);
    setup_smoothing_check(app, ctx);
    setup_validate_model(app, ctx);
    setup_simulate(app, ctx);

    try {
        std::vector<std::string> args =
            expand_config_args(std::vector<std::string>(argv + 1, argv + argc));
        std::reverse(args.begin(), args.end());
        app.parse(std::move(args));
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return ctx.exit_code;
}
