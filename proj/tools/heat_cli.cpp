#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <heat/approx.hpp>
#include <heat/dataset.hpp>
#include <heat/model_file.hpp>
#include <heat/random.hpp>
#include <heat/simulation.hpp>
#include <heat/solver.hpp>
#include <heat/tuning.hpp>

namespace fs = std::filesystem;
using namespace heat;

namespace {

// Bad input: reported with exit code 1.
struct InputError : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

struct Global
{
    std::uint64_t seed = 1;
    int threads = 1;
    bool quiet = false;
};

struct FitFlags
{
    std::string manifest;
    std::string estimator = "heat";
    std::optional<double> lambda, gamma;
    bool cv = false;
    int folds = 10;
    int grid_size = 50;
    std::string gamma_ratios = "0,0.25,0.5,1";
    std::string pilot_formula = "natural";
    std::string population;
    std::string sigma;
    std::string scale = "unit_norm_bounded";
    std::string holdout;
    std::string out;
    std::string report;
    std::string model;   // cv: optional model output
};

std::vector<double> parse_list(const std::string& flag, const std::string& text)
{
    std::vector<double> out;
    std::stringstream ss(text);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        try {
            size_t used = 0;
            out.push_back(std::stod(cell, &used));
            if (cell.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(cell);
        } catch (const std::exception&) {
            throw InputError(flag + ": not a number: '" + cell + "'");
        }
    }
    if (out.empty()) throw InputError(flag + ": empty list");
    return out;
}

std::vector<std::string> parse_names(const std::string& text)
{
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        const auto b = cell.find_first_not_of(" \t");
        if (b == std::string::npos) continue;
        out.push_back(cell.substr(b, cell.find_last_not_of(" \t") - b + 1));
    }
    return out;
}

std::string exact(double v)
{
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string num(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

bool heat_family(const std::string& e)
{
    return e != "sen" && e != "aen";
}

CVPlan make_plan(const FitFlags& f, const Global& g)
{
    CVPlan plan;
    plan.folds = f.folds;
    plan.grid_size = f.grid_size;
    plan.gamma_ratios = parse_list("--gamma-ratios", f.gamma_ratios);
    plan.seed = g.seed;
    plan.threads = g.threads;
    return plan;
}

CVOptions make_options(const FitFlags& f, const Global& g, Index J)
{
    CVOptions o;
    o.pilot.formula = parse_pilot_formula(f.pilot_formula);
    o.pilot.seed = substream_seed(g.seed, "pilot");
    if (!f.sigma.empty()) {
        const auto s = parse_list("--sigma", f.sigma);
        if (static_cast<Index>(s.size()) != J) throw InputError("--sigma needs one value per population");
        o.sigma_true = Eigen::Map<const Vector>(s.data(), J);
    }
    return o;
}

struct FitOutcome
{
    FitResult fit;
    std::optional<CVOutcome> cv;
};

FitOutcome run_fit(const MultiPopDataset& data, const FitFlags& f, const Global& g)
{
    const bool explicit_penalty = f.lambda.has_value() || f.gamma.has_value();
    FitOutcome out;
    if (!heat_family(f.estimator)) {
        if (explicit_penalty) throw InputError("--lambda/--gamma apply to the heat estimators; sen and aen are tuned by CV");
        ElasticNetCVConfig en;
        en.folds = f.folds;
        en.grid_size = f.grid_size;
        en.seed = g.seed;
        if (f.estimator == "sen") {
            if (f.population.empty()) throw InputError("--estimator sen needs --population");
            if (data.find(f.population) < 0) throw InputError("--population: no population '" + f.population + "'");
            out.fit = fit_sen(data, f.population, en);
        } else {
            out.fit = fit_aen(data, en);
        }
        return out;
    }

    const Estimator est = parse_estimator(f.estimator);
    const CVOptions opts = make_options(f, g, data.num_populations());
    if (est == Estimator::heat_oracle && opts.sigma_true.size() == 0)
        throw InputError("--estimator heat-oracle needs --sigma");
    if (f.cv == explicit_penalty) throw InputError("give either --lambda and --gamma, or --cv");
    if (f.cv) {
        out.cv = cross_validate(data, est, make_plan(f, g), opts);
        out.fit = out.cv->fit;
        return out;
    }
    if (!f.lambda || !f.gamma) throw InputError("--lambda and --gamma must be given together");
    const auto params = PenaltyParams::for_dataset(data, *f.lambda, *f.gamma);
    switch (est) {
    case Estimator::heat: out.fit = fit_heat(data, params, opts.solver); break;
    case Estimator::heat_app: out.fit = fit_heat_approx(data, params, opts.solver, opts.pilot); break;
    case Estimator::reheat: out.fit = fit_reheat(data, params, opts.solver); break;
    case Estimator::heat_oracle: out.fit = fit_heat_oracle(data, params, opts.solver, opts.sigma_true); break;
    }
    return out;
}

void write_report(std::ostream& os, const FitResult& fit, const MultiPopDataset& data, const MultiPopDataset* holdout)
{
    os << "estimator " << fit.estimator << "\n";
    os << "lambda " << num(fit.params.lambda) << "  gamma " << num(fit.params.gamma) << "\n";
    os << "converged " << (fit.converged ? "yes" : "no") << "  iterations " << fit.iterations << "\n\n";

    const auto support = support_stats(fit);
    os << "population  n  sigma_hat  intercept  support\n";
    for (size_t c = 0; c < fit.labels.size(); ++c) {
        const Index col = static_cast<Index>(c);
        const Index j = data.find(fit.labels[c]);
        os << fit.labels[c] << "  " << data.population(j).n() << "  " << num(fit.sigma_hat(col)) << "  "
           << num(fit.intercepts(col)) << "  " << support.selected[c] << "\n";
    }
    if (fit.labels.size() > 1) {
        os << "\nshared support: fraction of row population's selected predictors also selected in column population\n";
        os << "population";
        for (const auto& l : fit.labels) os << "  " << l;
        os << "\n";
        for (size_t a = 0; a < fit.labels.size(); ++a) {
            os << fit.labels[a];
            for (size_t b = 0; b < fit.labels.size(); ++b) {
                const double shared = support.shared(static_cast<Index>(a), static_cast<Index>(b));
                const double sel = static_cast<double>(support.selected[a]);
                os << "  " << static_cast<Index>(shared) << " (" << (sel > 0 ? num(shared / sel) : "NA") << ")";
            }
            os << "\n";
        }
        os << "union support " << support.union_size << "\n";
    }
    if (holdout) {
        const Vector r2 = test_r2(fit, *holdout);
        os << "\npopulation  test_r2\n";
        for (size_t c = 0; c < fit.labels.size(); ++c) os << fit.labels[c] << "  " << num(r2(static_cast<Index>(c))) << "\n";
        if (fit.labels.size() > 1) {
            os << "\npop_a,pop_b,test_r2_difference,sigma_hat_ratio\n";
            for (size_t a = 0; a < fit.labels.size(); ++a)
                for (size_t b = a + 1; b < fit.labels.size(); ++b) {
                    const Index ia = static_cast<Index>(a), ib = static_cast<Index>(b);
                    os << fit.labels[a] << ',' << fit.labels[b] << ',' << num(r2(ia) - r2(ib)) << ','
                       << num(fit.sigma_hat(ia) / fit.sigma_hat(ib)) << "\n";
                }
        }
    }
}

// The report goes to --report, else to stdout when stdout is free, else stderr.
void emit_report(const FitFlags& f, const Global& g, bool stdout_taken, const FitResult& fit,
                 const MultiPopDataset& data, const MultiPopDataset* holdout)
{
    if (!f.report.empty()) {
        std::ofstream os(f.report);
        if (!os) throw InputError(f.report + ": cannot open for writing");
        write_report(os, fit, data, holdout);
        return;
    }
    if (g.quiet) return;
    write_report(stdout_taken ? std::cerr : std::cout, fit, data, holdout);
}

void write_text(const std::string& path, const std::string& text)
{
    if (path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InputError(path + ": cannot open for writing");
    os << text;
}

MultiPopDataset load(const std::string& manifest, const FitFlags& f)
{
    StandardizeOptions opts;
    opts.mode = parse_scale_mode(f.scale);
    return load_dataset(fs::path(manifest), opts);
}

int cmd_fit(const FitFlags& f, const Global& g)
{
    const auto data = load(f.manifest, f);
    std::optional<MultiPopDataset> holdout;
    if (!f.holdout.empty()) holdout = load(f.holdout, f);
    const auto outcome = run_fit(data, f, g);
    const auto model = model_from_fit(outcome.fit, data.predictors(), g.seed);
    write_text(f.out, to_text(model));
    emit_report(f, g, f.out.empty(), outcome.fit, data, holdout ? &*holdout : nullptr);
    if (!outcome.fit.converged) {
        std::cerr << "warning: solver did not converge (kkt residual " << num(outcome.fit.kkt_residual) << ")\n";
        return 2;
    }
    return 0;
}

int cmd_cv(FitFlags f, const Global& g)
{
    if (!heat_family(f.estimator)) throw InputError("cv: the surface is available for heat estimators only; use fit for sen/aen");
    if (f.lambda || f.gamma) throw InputError("cv: --lambda/--gamma are not accepted");
    f.cv = true;
    const auto data = load(f.manifest, f);
    const auto outcome = run_fit(data, f, g);
    std::ostringstream os;
    os << "lambda,gamma,gamma_ratio,score";
    for (const auto& b : data.populations()) os << ",mse_" << b.label;
    os << ",selected\n";
    for (const auto& pt : outcome.cv->surface) {
        os << exact(pt.lambda) << ',' << exact(pt.gamma) << ',' << exact(pt.gamma_ratio) << ',' << exact(pt.score);
        for (Index j = 0; j < pt.population_mse.size(); ++j) os << ',' << exact(pt.population_mse(j));
        const bool sel = pt.lambda == outcome.cv->selected.lambda && pt.gamma == outcome.cv->selected.gamma;
        os << ',' << (sel ? 1 : 0) << "\n";
    }
    write_text(f.out, os.str());
    if (!f.model.empty()) write_text(f.model, to_text(model_from_fit(outcome.fit, data.predictors(), g.seed)));
    if (!g.quiet)
        std::cerr << "selected lambda " << num(outcome.cv->selected.lambda) << " gamma "
                  << num(outcome.cv->selected.gamma) << " score " << num(outcome.cv->selected.score) << "\n";
    return outcome.fit.converged ? 0 : 2;
}

int cmd_predict(const std::string& model_path, const std::string& data_path, std::string population,
                const std::string& out)
{
    const auto model = read_model(model_path);
    if (population.empty()) {
        if (model.populations.size() != 1) throw InputError("predict: model has several populations; pass --population");
        population = model.populations.front().label;
    }
    const auto& pop = model.population(population);
    const auto raw = read_population_file(data_path, population, true);
    Vector yhat;
    try {
        yhat = predict(pop, raw.predictors, raw.X);
    } catch (const ModelError& e) {
        throw InputError(data_path + ": " + e.what());
    }
    std::ostringstream os;
    os << "row,prediction\n";
    for (Index i = 0; i < yhat.size(); ++i) os << i + 1 << ',' << exact(yhat(i)) << "\n";
    write_text(out, os.str());
    return 0;
}

int cmd_export(const std::string& model_path, const std::string& out)
{
    std::ostringstream os;
    write_weights(os, read_model(model_path));
    write_text(out, os.str());
    return 0;
}

struct SimFlags
{
    std::string config;
    std::string snr_formula;   // empty keeps the config's choice
    bool seed_given = false;
    std::string estimators;
    int replicates = 0;
    std::string focus;
    std::string out;
};

int cmd_simulate(const SimFlags& s, FitFlags f, const Global& g, const CLI::App& sub)
{
    SimulationFile file = read_simulation_config(s.config);
    auto extra = [&](const std::string& key) -> std::optional<std::string> {
        auto it = file.extras.find(key);
        if (it == file.extras.end()) return std::nullopt;
        return it->second;
    };
    auto given = [&](const std::string& flag) { return sub.count(flag) > 0; };

    ExperimentConfig cfg;
    if (!s.estimators.empty()) cfg.estimators = parse_names(s.estimators);
    else if (auto v = extra("estimators")) cfg.estimators = parse_names(*v);
    if (s.replicates > 0) cfg.replicates = s.replicates;
    else if (auto v = extra("replicates")) cfg.replicates = static_cast<int>(parse_list("replicates", *v).at(0));
    if (!s.focus.empty()) cfg.focus = parse_names(s.focus);
    else if (auto v = extra("focus")) cfg.focus = parse_names(*v);
    if (!given("--folds"))
        if (auto v = extra("folds")) f.folds = static_cast<int>(parse_list("folds", *v).at(0));
    if (!given("--grid-size"))
        if (auto v = extra("grid_size")) f.grid_size = static_cast<int>(parse_list("grid_size", *v).at(0));
    if (!given("--gamma-ratios"))
        if (auto v = extra("gamma_ratios")) f.gamma_ratios = *v;
    if (!given("--pilot-formula"))
        if (auto v = extra("pilot_formula")) f.pilot_formula = *v;
    for (const auto& [key, value] : file.extras) {
        static const std::set<std::string> known = {"estimators", "replicates", "focus", "folds",
                                                    "grid_size", "gamma_ratios", "pilot_formula"};
        if (!known.count(key)) throw InputError(s.config + ": unknown key '" + key + "'");
    }
    for (const auto& e : cfg.estimators)
        if (heat_family(e)) (void)parse_estimator(e);

    cfg.cv = make_plan(f, g);
    cfg.cv_options.pilot.formula = parse_pilot_formula(f.pilot_formula);
    cfg.elastic_net.folds = f.folds;
    cfg.elastic_net.grid_size = f.grid_size;
    cfg.threads = g.threads;
    for (auto& sc : file.grid) {
        if (s.seed_given) sc.seed = g.seed;
        if (!s.snr_formula.empty()) sc.snr_formula = parse_snr_formula(s.snr_formula);
    }

    const auto results = run_experiment(file.grid, cfg);
    const auto summary = summarize(results.rows);
    std::ostringstream rows_text, summary_text;
    write_results(rows_text, results.rows);
    write_summary(summary_text, summary);
    if (s.out.empty()) {
        std::cout << summary_text.str();
    } else {
        fs::create_directories(s.out);
        write_text((fs::path(s.out) / "results.csv").string(), rows_text.str());
        write_text((fs::path(s.out) / "summary.csv").string(), summary_text.str());
    }
    for (const auto& msg : results.failures) std::cerr << "failure: " << msg << "\n";
    if (!g.quiet)
        for (const auto& [name, secs] : results.seconds) std::cerr << "time " << name << " " << num(secs) << " s\n";
    return results.failures.empty() ? 0 : 2;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Heteroscedastic multi-population sparse group lasso"};
    app.require_subcommand(1);
    Global g;
    app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
    app.add_option("--threads", g.threads, "Worker thread cap")->capture_default_str()->check(CLI::PositiveNumber);
    app.add_flag("--quiet", g.quiet, "Only write the requested artifact to stdout");
    app.fallthrough();

    FitFlags f;
    auto add_fit_flags = [&](CLI::App* c, bool penalty) {
        c->add_option("--manifest", f.manifest, "Manifest of 'label = path' lines")->required();
        c->add_option("--estimator", f.estimator)
            ->check(CLI::IsMember({"heat", "heat-app", "reheat", "heat-oracle", "sen", "aen"}))
            ->capture_default_str();
        if (penalty) {
            c->add_option("--lambda", f.lambda, "Group penalty weight");
            c->add_option("--gamma", f.gamma, "Elementwise penalty weight");
            c->add_flag("--cv", f.cv, "Tune (lambda, gamma) by cross-validation");
            c->add_option("--population", f.population, "Population for --estimator sen");
            c->add_option("--holdout", f.holdout, "Manifest of held-out data for test R^2");
            c->add_option("--report", f.report, "Write the fit report here");
        } else {
            c->add_option("--model", f.model, "Also write the refitted model here");
        }
        c->add_option("--folds", f.folds)->capture_default_str()->check(CLI::Range(2, 1000000));
        c->add_option("--grid-size", f.grid_size)->capture_default_str()->check(CLI::PositiveNumber);
        c->add_option("--gamma-ratios", f.gamma_ratios)->capture_default_str();
        c->add_option("--pilot-formula", f.pilot_formula)->capture_default_str();
        c->add_option("--sigma", f.sigma, "True noise SDs for heat-oracle, comma separated");
        c->add_option("--scale", f.scale, "none | unit_norm_bounded | unit_variance")->capture_default_str();
        c->add_option("--out", f.out, "Output path (stdout when omitted)");
    };
    auto* fit = app.add_subcommand("fit", "Fit a model and write a model file");
    add_fit_flags(fit, true);
    auto* cv = app.add_subcommand("cv", "Cross-validate and write the score surface");
    add_fit_flags(cv, false);

    std::string model_path, data_path, population, out;
    auto* pred = app.add_subcommand("predict", "Predict from a model file");
    pred->add_option("--model", model_path)->required();
    pred->add_option("--data", data_path, "Delimited file; a leading 'response' column is ignored")->required();
    pred->add_option("--population", population);
    pred->add_option("--out", out);

    auto* exp = app.add_subcommand("export-weights", "Write per-predictor weights as CSV");
    exp->add_option("--model", model_path)->required();
    exp->add_option("--out", out);

    SimFlags s;
    auto* sim = app.add_subcommand("simulate", "Run a simulation grid");
    sim->add_option("--config", s.config, "Scenario file")->required();
    sim->add_option("--estimators", s.estimators, "Comma separated estimator list");
    sim->add_option("--replicates", s.replicates)->check(CLI::PositiveNumber);
    sim->add_option("--focus", s.focus, "Populations to report");
    sim->add_option("--folds", f.folds)->check(CLI::Range(2, 1000000));
    sim->add_option("--grid-size", f.grid_size)->check(CLI::PositiveNumber);
    sim->add_option("--gamma-ratios", f.gamma_ratios);
    sim->add_option("--pilot-formula", f.pilot_formula);
    sim->add_option("--snr-formula", s.snr_formula, "definition | as_printed");
    sim->add_option("--out", s.out, "Output directory for results.csv and summary.csv");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (*fit) return cmd_fit(f, g);
        if (*cv) return cmd_cv(f, g);
        if (*pred) return cmd_predict(model_path, data_path, population, out);
        if (*exp) return cmd_export(model_path, out);
        if (*sim) {
            s.seed_given = app.count("--seed") > 0;
            return cmd_simulate(s, f, g, *sim);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
