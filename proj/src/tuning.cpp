#include <heat/tuning.hpp>

#include <cmath>
#include <stdexcept>

#include <heat/parallel.hpp>
#include <heat/random.hpp>

namespace heat {
namespace {

// One grid "lane": a gamma ratio and its descending lambda sequence, fitted
// with warm starts. Explicit grids become single-point lanes.
struct Lane
{
    double ratio = 0.0;
    std::vector<double> lambdas;
    std::vector<double> gammas;
};

std::vector<Lane> build_lanes(const HeatProblem& problem, const CVPlan& plan, const Vector& rho)
{
    std::vector<Lane> lanes;
    if (!plan.grid.empty()) {
        for (const auto& [lam, gam] : plan.grid) {
            Lane lane;
            lane.ratio = lam > 0.0 ? gam / lam : 0.0;
            lane.lambdas = {lam};
            lane.gammas = {gam};
            lanes.push_back(std::move(lane));
        }
        return lanes;
    }
    const Matrix grad = problem.gradient_at_zero(rho);
    const auto shape = problem.penalty(0.0, 0.0);
    for (double ratio : plan.gamma_ratios) {
        Lane lane;
        lane.ratio = ratio;
        const double lmax = lambda_max_from_gradient(grad, shape, ratio);
        lane.lambdas = lambda_grid(lmax > 0.0 ? lmax : 1.0, plan.grid_size, plan.grid_min_ratio);
        for (double l : lane.lambdas) lane.gammas.push_back(ratio * l);
        lanes.push_back(std::move(lane));
    }
    return lanes;
}

SolverConfig solver_for(Estimator estimator, const CVOptions& options, const Vector& rho)
{
    SolverConfig cfg = options.solver;
    switch (estimator) {
    case Estimator::heat:
        cfg.rho_mode = RhoMode::free;
        break;
    case Estimator::reheat:
        cfg.rho_mode = RhoMode::unit;
        break;
    case Estimator::heat_app:
    case Estimator::heat_oracle:
        cfg.rho_mode = RhoMode::fixed;
        cfg.rho_fixed = rho;
        break;
    }
    return cfg;
}

std::vector<FitResult> fit_lane(const HeatProblem& problem, const Lane& lane, const SolverConfig& cfg, Index upto)
{
    std::vector<FitResult> fits;
    CoefficientState warm;
    for (Index i = 0; i <= upto; ++i) {
        const auto params = problem.penalty(lane.lambdas[static_cast<size_t>(i)], lane.gammas[static_cast<size_t>(i)]);
        fits.push_back(fit_heat(problem, params, cfg, i == 0 ? nullptr : &warm));
        warm = CoefficientState{fits.back().theta, fits.back().rho};
    }
    return fits;
}

bool better(const CVPoint& a, const CVPoint& b)
{
    const double tol = 1e-12 * std::max(1.0, std::abs(b.score));
    if (a.score < b.score - tol) return true;
    if (a.score > b.score + tol) return false;
    if (a.lambda != b.lambda) return a.lambda > b.lambda;
    return a.gamma > b.gamma;
}

} // namespace

Estimator parse_estimator(const std::string& s)
{
    if (s == "heat") return Estimator::heat;
    if (s == "heat-app" || s == "heat_app") return Estimator::heat_app;
    if (s == "reheat") return Estimator::reheat;
    if (s == "heat-oracle" || s == "heat_oracle" || s == "heat-orc") return Estimator::heat_oracle;
    throw std::invalid_argument("unknown estimator '" + s + "'");
}

std::string to_string(Estimator e)
{
    switch (e) {
    case Estimator::heat: return "heat";
    case Estimator::heat_app: return "heat-app";
    case Estimator::reheat: return "reheat";
    case Estimator::heat_oracle: return "heat-oracle";
    }
    return "?";
}

std::vector<std::vector<int>> population_folds(const MultiPopDataset& data, int folds, std::uint64_t seed)
{
    std::vector<std::vector<int>> out;
    for (Index j = 0; j < data.num_populations(); ++j) {
        const auto& b = data.population(j);
        if (b.n() < folds)
            throw std::invalid_argument("population '" + b.label + "' has fewer rows than CV folds");
        out.push_back(assign_folds(static_cast<size_t>(b.n()), folds, substream_seed(seed, "cv-folds", static_cast<std::uint64_t>(j))));
    }
    return out;
}

CVOutcome cross_validate(const MultiPopDataset& data, Estimator estimator, const CVPlan& plan, const CVOptions& options)
{
    if (plan.folds < 2) throw std::invalid_argument("cross_validate: need at least 2 folds");
    const Index J = data.num_populations();
    const HeatProblem full(data);

    Vector rho;
    switch (estimator) {
    case Estimator::heat:
        rho = full.null_rho();
        break;
    case Estimator::reheat:
        rho = Vector::Ones(J);
        break;
    case Estimator::heat_app:
        rho = pilot_variances(data, options.pilot).sigma_check.cwiseInverse();
        break;
    case Estimator::heat_oracle:
        if (options.sigma_true.size() != J || (options.sigma_true.array() <= 0.0).any())
            throw std::invalid_argument("cross_validate: heat-oracle needs positive sigma_true per population");
        rho = options.sigma_true.cwiseInverse();
        break;
    }
    const SolverConfig cfg = solver_for(estimator, options, rho);
    const auto lanes = build_lanes(full, plan, rho);
    const auto folds = population_folds(data, plan.folds, plan.seed);

    std::vector<Matrix> raw_design;
    std::vector<Vector> raw_response;
    Vector sst(J);
    for (Index j = 0; j < J; ++j) {
        raw_design.push_back(destandardize_design(data.population(j)));
        raw_response.push_back(destandardize_response(data.population(j)));
        sst(j) = data.population(j).y.squaredNorm();
    }

    // sse[fold][lane][point] per population
    std::vector<std::vector<std::vector<Vector>>> sse(static_cast<size_t>(plan.folds));
    parallel_for(static_cast<size_t>(plan.folds), plan.threads, [&](size_t f) {
        std::vector<std::vector<Index>> train(static_cast<size_t>(J));
        for (Index j = 0; j < J; ++j)
            for (size_t i = 0; i < folds[static_cast<size_t>(j)].size(); ++i)
                if (folds[static_cast<size_t>(j)][i] != static_cast<int>(f)) train[static_cast<size_t>(j)].push_back(static_cast<Index>(i));
        const MultiPopDataset train_data = data.subset(train);
        for (Index j = 0; j < J; ++j)
            if (train_data.population(j).y.squaredNorm() == 0.0)
                throw std::runtime_error("cross_validate: training fold has a constant response in population '" +
                                         train_data.population(j).label + "'");
        const HeatProblem problem(train_data);
        auto& out = sse[f];
        for (const auto& lane : lanes) {
            const auto fits = fit_lane(problem, lane, cfg, static_cast<Index>(lane.lambdas.size()) - 1);
            std::vector<Vector> per_point;
            for (const auto& fit : fits) {
                Vector err = Vector::Zero(J);
                for (Index j = 0; j < J; ++j) {
                    const auto& fj = folds[static_cast<size_t>(j)];
                    for (size_t i = 0; i < fj.size(); ++i) {
                        if (fj[i] != static_cast<int>(f)) continue;
                        const Index row = static_cast<Index>(i);
                        const double pred = fit.intercepts(j) + raw_design[static_cast<size_t>(j)].row(row).dot(fit.B_hat.col(j));
                        const double r = raw_response[static_cast<size_t>(j)](row) - pred;
                        err(j) += r * r;
                    }
                }
                per_point.push_back(std::move(err));
            }
            out.push_back(std::move(per_point));
        }
    });

    CVOutcome outcome;
    outcome.rho_grid = rho;
    const double n_total = static_cast<double>(data.total_samples());
    Index best_lane = -1, best_point = -1;
    for (size_t l = 0; l < lanes.size(); ++l) {
        for (size_t i = 0; i < lanes[l].lambdas.size(); ++i) {
            Vector total = Vector::Zero(J);
            for (const auto& fold_sse : sse) total += fold_sse[l][i];
            CVPoint pt;
            pt.lambda = lanes[l].lambdas[i];
            pt.gamma = lanes[l].gammas[i];
            pt.gamma_ratio = lanes[l].ratio;
            pt.population_mse.resize(J);
            for (Index j = 0; j < J; ++j) pt.population_mse(j) = total(j) / static_cast<double>(data.population(j).n());
            if (plan.score == CVScore::mse) {
                pt.score = total.sum() / n_total;
            } else {
                // population-weighted 1 - R^2
                double s = 0.0;
                for (Index j = 0; j < J; ++j)
                    s += static_cast<double>(data.population(j).n()) / n_total * (sst(j) > 0.0 ? total(j) / sst(j) : 0.0);
                pt.score = s;
            }
            if (best_lane < 0 || better(pt, outcome.selected)) {
                outcome.selected = pt;
                best_lane = static_cast<Index>(l);
                best_point = static_cast<Index>(i);
            }
            outcome.surface.push_back(std::move(pt));
        }
    }

    auto fits = fit_lane(full, lanes[static_cast<size_t>(best_lane)], cfg, best_point);
    outcome.fit = std::move(fits.back());
    outcome.fit.estimator = to_string(estimator);
    return outcome;
}

Vector predict(const FitResult& fit, Index column, const Matrix& X_raw)
{
    if (X_raw.cols() != fit.B_hat.rows()) throw std::invalid_argument("predict: design width does not match the model");
    return (X_raw * fit.B_hat.col(column)).array() + fit.intercepts(column);
}

double rmse(const Vector& beta_hat, const Vector& beta_star)
{
    const double denom = beta_star.squaredNorm();
    if (denom == 0.0) throw std::invalid_argument("rmse: beta_star is zero");
    return (beta_hat - beta_star).squaredNorm() / denom;
}

double rme(const Vector& beta_hat, const Vector& beta_star, const Matrix& X)
{
    const double denom = (X * beta_star).squaredNorm();
    if (denom == 0.0) throw std::invalid_argument("rme: X beta_star is zero");
    return (X * (beta_hat - beta_star)).squaredNorm() / denom;
}

Vector test_r2(const FitResult& model, const MultiPopDataset& holdout)
{
    const Index cols = static_cast<Index>(model.labels.size());
    if (holdout.num_predictors() != model.B_hat.rows())
        throw std::invalid_argument("test_r2: holdout predictor union differs from the model's");
    Vector r2(cols);
    for (Index c = 0; c < cols; ++c) {
        const Index j = holdout.find(model.labels[static_cast<size_t>(c)]);
        if (j < 0) throw std::invalid_argument("test_r2: holdout lacks population '" + model.labels[static_cast<size_t>(c)] + "'");
        const auto& b = holdout.population(j);
        const Vector y = destandardize_response(b);
        const Vector pred = predict(model, c, destandardize_design(b));
        const double sse = (y - pred).squaredNorm();
        const double sst = b.y.squaredNorm();
        r2(c) = sst > 0.0 ? 1.0 - sse / sst : 0.0;
    }
    return r2;
}

bool passes_r2_filter(const Vector& r2, double threshold)
{
    return r2.size() > 0 && r2.mean() >= threshold;
}

SupportStats support_stats(const FitResult& fit)
{
    SupportStats s;
    const Index cols = fit.B_hat.cols();
    s.shared = Matrix::Zero(cols, cols);
    for (Index c = 0; c < cols; ++c) s.selected.push_back((fit.B_hat.col(c).array() != 0.0).count());
    for (Index k = 0; k < fit.B_hat.rows(); ++k) {
        bool any = false;
        for (Index a = 0; a < cols; ++a) {
            if (fit.B_hat(k, a) == 0.0) continue;
            any = true;
            for (Index b = 0; b < cols; ++b)
                if (fit.B_hat(k, b) != 0.0) s.shared(a, b) += 1.0;
        }
        if (any) ++s.union_size;
    }
    return s;
}

} // namespace heat
