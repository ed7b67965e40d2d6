#include <heat/approx.hpp>

#include <cmath>
#include <stdexcept>

#include <heat/random.hpp>

namespace heat {
namespace {

struct ElasticNetChoice
{
    double lambda = 0.0;
    double alpha = 1.0;
    double error = 0.0;
    Vector beta;
};

ElasticNetChoice select_elastic_net(const Vector& y, const Matrix& X, const ElasticNetCVConfig& config,
                                    const std::vector<int>* groups)
{
    const GramProblem full = GramProblem::from(y, X);
    ElasticNetChoice best;
    bool have = false;
    for (size_t a = 0; a < config.alphas.size(); ++a) {
        const double alpha = config.alphas[a];
        const double lmax = elastic_net_lambda_max(full, alpha);
        if (lmax == 0.0) continue;
        const auto grid = lambda_grid(lmax, config.grid_size, config.grid_min_ratio);
        // every alpha sees the same folds
        const auto cv = cross_validate_elastic_net(y, X, grid, alpha, config.folds, config.seed, config.solver, groups);
        const double err = cv.cv_error[static_cast<size_t>(cv.best)];
        if (!have || err < best.error) {
            have = true;
            best.error = err;
            best.alpha = alpha;
            best.lambda = grid[static_cast<size_t>(cv.best)];
            const std::vector<double> head(grid.begin(), grid.begin() + cv.best + 1);
            best.beta = elastic_net_path(full, head, alpha, config.solver).back();
        }
    }
    if (!have) {
        best.beta = Vector::Zero(X.cols());
        best.lambda = 0.0;
    }
    return best;
}

} // namespace

PilotFormula parse_pilot_formula(const std::string& s)
{
    if (s == "natural") return PilotFormula::natural;
    if (s == "as_printed" || s == "as-printed") return PilotFormula::as_printed;
    throw std::invalid_argument("unknown pilot formula '" + s + "'");
}

std::vector<double> natural_lasso_grid(const Vector& y, const Matrix& X, int size, double min_ratio)
{
    const double phi_max = (X.transpose() * y).cwiseAbs().maxCoeff() / static_cast<double>(y.size());
    if (phi_max == 0.0) return {0.0};
    return lambda_grid(phi_max, size, min_ratio);
}

double natural_lasso_value(const Vector& y, const Matrix& X, const Vector& beta, double phi, PilotFormula formula)
{
    const double n = static_cast<double>(y.size());
    const double rss = (y - X * beta).squaredNorm();
    const double l1 = beta.cwiseAbs().sum();
    if (formula == PilotFormula::natural) return rss / n + 2.0 * phi * l1;
    return rss / (2.0 * n) + phi * l1;
}

PilotEntry natural_lasso_sigma(const Vector& y, const Matrix& X, const std::vector<double>& phi_grid, int folds,
                               std::uint64_t seed, PilotFormula formula)
{
    if (folds < 2 || folds > y.size()) throw std::invalid_argument("natural_lasso_sigma: need 2 <= folds <= n");
    if (phi_grid.empty()) throw std::invalid_argument("natural_lasso_sigma: empty phi grid");
    PilotEntry out;
    Index best = 0;
    if (phi_grid.size() > 1) best = cross_validate_elastic_net(y, X, phi_grid, 1.0, folds, seed).best;
    const std::vector<double> head(phi_grid.begin(), phi_grid.begin() + best + 1);
    out.beta = elastic_net_path(GramProblem::from(y, X), head, 1.0).back();
    out.phi = phi_grid[static_cast<size_t>(best)];
    out.sigma2 = natural_lasso_value(y, X, out.beta, out.phi, formula);
    if (!(out.sigma2 > 0.0) || !std::isfinite(out.sigma2))
        throw std::runtime_error("natural_lasso_sigma: degenerate pilot (zero residual variance)");
    return out;
}

PilotVariances pilot_variances(const MultiPopDataset& data, const PilotConfig& config)
{
    PilotVariances pv;
    const Index J = data.num_populations();
    pv.sigma_check.resize(J);
    pv.phi_selected.resize(J);
    for (Index j = 0; j < J; ++j) {
        const auto& b = data.population(j);
        const auto grid = natural_lasso_grid(b.y, b.X, config.grid_size, config.grid_min_ratio);
        const int folds = static_cast<int>(std::min<Index>(config.folds, b.n()));
        const auto entry = natural_lasso_sigma(b.y, b.X, grid, folds,
                                               substream_seed(config.seed, "pilot", static_cast<std::uint64_t>(j)),
                                               config.formula);
        pv.sigma_check(j) = std::sqrt(entry.sigma2);
        pv.phi_selected(j) = entry.phi;
        pv.pilot_betas.push_back(entry.beta);
    }
    return pv;
}

FitResult fit_heat_approx(const HeatProblem& problem, const PenaltyParams& params, SolverConfig config,
                          const PilotVariances& pilot, const CoefficientState* warm_start)
{
    if (pilot.sigma_check.size() != problem.data().num_populations() || (pilot.sigma_check.array() <= 0.0).any())
        throw std::invalid_argument("fit_heat_approx: pilot variances must be positive, one per population");
    config.rho_mode = RhoMode::fixed;
    config.rho_fixed = pilot.sigma_check.cwiseInverse();
    FitResult r = fit_heat(problem, params, config, warm_start);
    r.estimator = "heat-app";
    return r;
}

FitResult fit_heat_approx(const MultiPopDataset& data, const PenaltyParams& params, SolverConfig config,
                          const PilotConfig& pilot_config)
{
    const auto pilot = pilot_variances(data, pilot_config);
    const HeatProblem problem(data);
    return fit_heat_approx(problem, params, std::move(config), pilot);
}

FitResult fit_sen(const MultiPopDataset& data, const std::string& population_label, const ElasticNetCVConfig& config)
{
    const Index j = data.find(population_label);
    if (j < 0) throw std::invalid_argument("fit_sen: unknown population '" + population_label + "'");
    const auto& b = data.population(j);
    ElasticNetCVConfig local = config;
    local.folds = static_cast<int>(std::min<Index>(config.folds, b.n()));
    const auto choice = select_elastic_net(b.y, b.X, local, nullptr);

    const Index p = data.num_predictors();
    FitResult r;
    r.estimator = "sen";
    r.labels = {b.label};
    r.B_hat = Matrix::Zero(p, 1);
    double intercept = b.response_mean;
    for (Index k = 0; k < p; ++k) {
        if (!b.available[static_cast<size_t>(k)]) continue;
        r.B_hat(k, 0) = choice.beta(k) / b.column_scales(k);
        intercept -= b.column_means(k) * r.B_hat(k, 0);
    }
    const double sigma = std::sqrt((b.y - b.X * choice.beta).squaredNorm() / static_cast<double>(b.n()));
    r.sigma_hat = Vector::Constant(1, sigma);
    r.intercepts = Vector::Constant(1, intercept);
    r.rho = r.sigma_hat.cwiseInverse();
    r.theta = choice.beta * r.rho(0);
    r.params = PenaltyParams::masked(data.availability().col(j), choice.lambda, choice.alpha * choice.lambda);
    r.converged = true;
    return r;
}

FitResult fit_aen(const MultiPopDataset& data, const ElasticNetCVConfig& config)
{
    const Index J = data.num_populations(), p = data.num_predictors();
    if (J < 2) throw std::invalid_argument("fit_aen: needs at least two populations");
    const Index N = data.total_samples();

    // per-population centered raw columns, stacked, then one shared scale
    Matrix X(N, p);
    Vector y(N);
    std::vector<int> groups(static_cast<size_t>(N));
    Index row = 0;
    for (Index j = 0; j < J; ++j) {
        const auto& b = data.population(j);
        X.middleRows(row, b.n()) = b.X * b.column_scales.asDiagonal();
        y.segment(row, b.n()) = b.y;
        for (Index i = 0; i < b.n(); ++i) groups[static_cast<size_t>(row + i)] = static_cast<int>(j);
        row += b.n();
    }
    Vector scale = Vector::Ones(p);
    for (Index k = 0; k < p; ++k) {
        const double s = std::sqrt(X.col(k).squaredNorm() / static_cast<double>(N));
        if (s > 0.0) {
            scale(k) = s;
            X.col(k) /= s;
        }
    }
    ElasticNetCVConfig local = config;
    Index smallest = N;
    for (const auto& b : data.populations()) smallest = std::min(smallest, b.n());
    local.folds = static_cast<int>(std::min<Index>(config.folds, smallest));
    const auto choice = select_elastic_net(y, X, local, &groups);

    FitResult r;
    r.estimator = "aen";
    r.B_hat = Matrix::Zero(p, J);
    r.intercepts = Vector::Zero(J);
    r.sigma_hat = Vector::Zero(J);
    const Vector beta = choice.beta.cwiseQuotient(scale);
    const Vector resid = y - X * choice.beta;
    const double sigma = std::sqrt(resid.squaredNorm() / static_cast<double>(N));
    for (Index j = 0; j < J; ++j) {
        const auto& b = data.population(j);
        r.labels.push_back(b.label);
        r.B_hat.col(j) = beta;
        r.intercepts(j) = b.response_mean - b.column_means.dot(beta);
        r.sigma_hat(j) = sigma;
    }
    r.rho = r.sigma_hat.cwiseInverse();
    r.theta = r.B_hat * (1.0 / sigma);
    r.params = PenaltyParams::for_dataset(data, choice.lambda, choice.alpha * choice.lambda);
    r.converged = true;
    return r;
}

} // namespace heat
