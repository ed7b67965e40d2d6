#pragma once
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <heat/approx.hpp>
#include <heat/dataset.hpp>
#include <heat/objective.hpp>
#include <heat/solver.hpp>

namespace heat {

enum class Estimator { heat, heat_app, reheat, heat_oracle };
enum class CVScore { mse, r2 };

Estimator parse_estimator(const std::string& s);
std::string to_string(Estimator e);

struct CVPlan
{
    int folds = 10;
    int grid_size = 50;
    double grid_min_ratio = 0.01;
    std::vector<double> gamma_ratios = {0.0, 0.25, 0.5, 1.0};
    /// Explicit (lambda, gamma) pairs; overrides grid_size/gamma_ratios when nonempty.
    std::vector<std::pair<double, double>> grid;
    std::uint64_t seed = 1;
    CVScore score = CVScore::mse;
    int threads = 1;
};

struct CVOptions
{
    SolverConfig solver;
    PilotConfig pilot;      // heat_app
    Vector sigma_true;      // heat_oracle
};

struct CVPoint
{
    double lambda = 0.0;
    double gamma = 0.0;
    double gamma_ratio = 0.0;
    double score = 0.0;
    Vector population_mse;   // held-out mean squared error per population
};

struct CVOutcome
{
    CVPoint selected;
    std::vector<CVPoint> surface;
    FitResult fit;               // refit on all data at the selected point
    Vector rho_grid;             // precisions used to build the lambda grid
};

/// Per population, the fold id of every row. Folds never mix populations.
std::vector<std::vector<int>> population_folds(const MultiPopDataset& data, int folds, std::uint64_t seed);

/*
 * K-fold cross-validation of (lambda, gamma). Held-out error is measured on the
 * original response scale and pooled with population-size weights. Ties go to
 * the larger lambda, then the larger gamma.
 */
CVOutcome cross_validate(const MultiPopDataset& data, Estimator estimator, const CVPlan& plan,
                         const CVOptions& options = {});

/// Original-scale predictions of column `column` of a fit for raw rows laid
/// out in the fit's predictor union.
Vector predict(const FitResult& fit, Index column, const Matrix& X_raw);

/// ||b_hat - b_star||^2 / ||b_star||^2
double rmse(const Vector& beta_hat, const Vector& beta_star);

/// ||X (b_hat - b_star)||^2 / ||X b_star||^2
double rme(const Vector& beta_hat, const Vector& beta_star, const Matrix& X);

/// Per fit column: 1 - SSE / SST on the holdout population with the same
/// label. Not clipped, so it can be negative.
Vector test_r2(const FitResult& model, const MultiPopDataset& holdout);

/// True when the mean test R^2 reaches the threshold.
bool passes_r2_filter(const Vector& r2, double threshold = 0.01);

struct SupportStats
{
    std::vector<Index> selected;        // nonzeros per column
    Matrix shared;                      // shared(a, b): predictors nonzero in both columns
    Index union_size = 0;               // predictors nonzero in any column
};

SupportStats support_stats(const FitResult& fit);

struct MetricReport
{
    double rmse = 0.0;
    double rme = 0.0;
    Vector r2_test;
    SupportStats support;
};

} // namespace heat
