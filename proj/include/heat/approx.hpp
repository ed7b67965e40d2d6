#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include <heat/dataset.hpp>
#include <heat/elastic_net.hpp>
#include <heat/objective.hpp>
#include <heat/solver.hpp>

namespace heat {

/// How the natural-lasso pilot turns a lasso fit into a variance.
///   natural:    (1/n)||y - X b||^2 + 2 phi ||b||_1
///   as_printed: (1/2n)||y - X b||^2 + phi ||b||_1   (the minimized lasso objective)
enum class PilotFormula { natural, as_printed };

PilotFormula parse_pilot_formula(const std::string& s);

struct PilotConfig
{
    PilotFormula formula = PilotFormula::natural;
    int folds = 10;
    int grid_size = 50;
    double grid_min_ratio = 0.01;
    std::uint64_t seed = 1;
};

struct PilotEntry
{
    double sigma2 = 0.0;
    double phi = 0.0;
    Vector beta;
};

struct PilotVariances
{
    Vector sigma_check;
    Vector phi_selected;
    std::vector<Vector> pilot_betas;
};

/// Geometric phi grid from max|X'y|/n downward.
std::vector<double> natural_lasso_grid(const Vector& y, const Matrix& X, int size, double min_ratio);

/// Natural-lasso variance with phi chosen by K-fold CV prediction error.
PilotEntry natural_lasso_sigma(const Vector& y, const Matrix& X, const std::vector<double>& phi_grid, int folds,
                               std::uint64_t seed, PilotFormula formula = PilotFormula::natural);

/// Variance value of the natural-lasso identity at a given lasso solution.
double natural_lasso_value(const Vector& y, const Matrix& X, const Vector& beta, double phi, PilotFormula formula);

/// One pilot per population (populations draw independent fold seeds).
PilotVariances pilot_variances(const MultiPopDataset& data, const PilotConfig& config = {});

/// Two-step approximation: rho fixed at 1/sigma_check, one Theta solve, then
/// B_hat column j = theta_j * sigma_check_j.
FitResult fit_heat_approx(const HeatProblem& problem, const PenaltyParams& params, SolverConfig config,
                          const PilotVariances& pilot, const CoefficientState* warm_start = nullptr);
FitResult fit_heat_approx(const MultiPopDataset& data, const PenaltyParams& params, SolverConfig config = {},
                          const PilotConfig& pilot_config = {});

struct ElasticNetCVConfig
{
    int folds = 10;
    std::vector<double> alphas = {0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    int grid_size = 50;
    double grid_min_ratio = 0.01;
    std::uint64_t seed = 1;
    ElasticNetConfig solver;
};

/*
 * Separate elastic net on one population, (lambda, alpha) by K-fold CV.
 * The result has a single column. params.lambda holds the selected lambda and
 * params.gamma the L1 weight alpha * lambda.
 */
FitResult fit_sen(const MultiPopDataset& data, const std::string& population_label,
                  const ElasticNetCVConfig& config = {});

/// Pooled elastic net over all populations with a distinct intercept per
/// population; the shared coefficient vector is replicated across columns.
FitResult fit_aen(const MultiPopDataset& data, const ElasticNetCVConfig& config = {});

} // namespace heat
