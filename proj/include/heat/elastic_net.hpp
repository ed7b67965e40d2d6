#pragma once
#include <cstdint>
#include <vector>

#include <heat/types.hpp>

namespace heat {

struct ElasticNetConfig
{
    int max_sweeps = 100000;
    double tol = 1e-12;   // max_k (H_kk * delta_k^2), H_kk = G_kk / n
};

struct ElasticNetResult
{
    Vector beta;
    int sweeps = 0;
    bool converged = false;
};

/// Sufficient statistics of a single least-squares problem.
struct GramProblem
{
    Matrix gram;   // X'X
    Vector xty;    // X'y
    double yty = 0.0;
    double n = 0.0;

    static GramProblem from(const Vector& y, const Matrix& X);
};

/*
 * Minimizes (1/2n)||y - X beta||^2 + alpha*lambda*||beta||_1 + lambda*(1-alpha)/2*||beta||^2
 * by cyclic coordinate descent with covariance updates.
 */
ElasticNetResult elastic_net(const GramProblem& problem, double lambda, double alpha,
                             const ElasticNetConfig& config = {}, const Vector* warm_start = nullptr);
ElasticNetResult elastic_net(const Vector& y, const Matrix& X, double lambda, double alpha,
                             const ElasticNetConfig& config = {});

/// Warm-started solutions along lambdas (descending).
std::vector<Vector> elastic_net_path(const GramProblem& problem, const std::vector<double>& lambdas, double alpha,
                                     const ElasticNetConfig& config = {});

/// Smallest lambda with beta = 0: max|X'y| / (n * alpha). alpha is floored at 1e-3.
double elastic_net_lambda_max(const GramProblem& problem, double alpha);

/// Max violation of the elastic-net stationarity conditions.
double elastic_net_kkt(const GramProblem& problem, const Vector& beta, double lambda, double alpha);

struct ElasticNetCV
{
    std::vector<double> lambdas;
    std::vector<double> cv_error;   // mean squared held-out error per lambda
    Index best = 0;                 // ties go to the larger lambda
};

/// K-fold CV over a lambda path. Each training fold is re-centered; held-out
/// predictions include the fold intercept. With groups, folds are drawn
/// within each group and every group gets its own intercept.
ElasticNetCV cross_validate_elastic_net(const Vector& y, const Matrix& X, const std::vector<double>& lambdas,
                                        double alpha, int folds, std::uint64_t seed,
                                        const ElasticNetConfig& config = {},
                                        const std::vector<int>* groups = nullptr);

} // namespace heat
