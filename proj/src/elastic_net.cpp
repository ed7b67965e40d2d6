#include <heat/elastic_net.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <heat/random.hpp>

namespace heat {
namespace {

double soft(double x, double t)
{
    if (x > t) return x - t;
    if (x < -t) return x + t;
    return 0.0;
}

// One coordinate update; returns H_kk * delta^2.
double update(const GramProblem& pr, Vector& beta, Vector& corr, Index k, double l1, double l2)
{
    const double hkk = pr.gram(k, k) / pr.n;
    if (hkk == 0.0) {
        // a zero column carries no loss; the ridge/lasso terms pin it at 0
        if (beta(k) != 0.0) {
            beta(k) = 0.0;
        }
        return 0.0;
    }
    const double z = corr(k) / pr.n + hkk * beta(k);
    const double next = soft(z, l1) / (hkk + l2);
    const double delta = next - beta(k);
    if (delta == 0.0) return 0.0;
    beta(k) = next;
    corr.noalias() -= pr.gram.col(k) * delta;
    return hkk * delta * delta;
}

} // namespace

GramProblem GramProblem::from(const Vector& y, const Matrix& X)
{
    GramProblem pr;
    pr.gram = Matrix::Zero(X.cols(), X.cols());
    pr.gram.selfadjointView<Eigen::Lower>().rankUpdate(X.transpose());
    pr.gram = pr.gram.selfadjointView<Eigen::Lower>();
    pr.xty = X.transpose() * y;
    pr.yty = y.squaredNorm();
    pr.n = static_cast<double>(y.size());
    return pr;
}

ElasticNetResult elastic_net(const GramProblem& pr, double lambda, double alpha, const ElasticNetConfig& config,
                             const Vector* warm_start)
{
    if (!(lambda >= 0.0)) throw std::invalid_argument("elastic_net: lambda must be >= 0");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("elastic_net: alpha must lie in [0, 1]");
    const Index p = pr.gram.rows();
    ElasticNetResult res;
    res.beta = warm_start ? *warm_start : Vector::Zero(p);
    Vector corr = pr.xty - pr.gram * res.beta;   // X'(y - X beta)
    const double l1 = alpha * lambda, l2 = (1.0 - alpha) * lambda;

    std::vector<Index> active;
    while (res.sweeps < config.max_sweeps) {
        // full sweep, then iterate on the nonzero set until it settles
        double worst = 0.0;
        for (Index k = 0; k < p; ++k) worst = std::max(worst, update(pr, res.beta, corr, k, l1, l2));
        ++res.sweeps;
        if (worst < config.tol) {
            res.converged = true;
            break;
        }
        active.clear();
        for (Index k = 0; k < p; ++k)
            if (res.beta(k) != 0.0) active.push_back(k);
        while (res.sweeps < config.max_sweeps) {
            double inner = 0.0;
            for (Index k : active) inner = std::max(inner, update(pr, res.beta, corr, k, l1, l2));
            ++res.sweeps;
            if (inner < config.tol) break;
        }
    }
    return res;
}

ElasticNetResult elastic_net(const Vector& y, const Matrix& X, double lambda, double alpha,
                             const ElasticNetConfig& config)
{
    if (X.rows() != y.size()) throw std::invalid_argument("elastic_net: X and y disagree on the number of rows");
    return elastic_net(GramProblem::from(y, X), lambda, alpha, config);
}

std::vector<Vector> elastic_net_path(const GramProblem& pr, const std::vector<double>& lambdas, double alpha,
                                     const ElasticNetConfig& config)
{
    std::vector<Vector> out;
    out.reserve(lambdas.size());
    Vector warm = Vector::Zero(pr.gram.rows());
    for (double lam : lambdas) {
        auto r = elastic_net(pr, lam, alpha, config, &warm);
        warm = r.beta;
        out.push_back(std::move(r.beta));
    }
    return out;
}

double elastic_net_lambda_max(const GramProblem& pr, double alpha)
{
    return pr.xty.cwiseAbs().maxCoeff() / (pr.n * std::max(alpha, 1e-3));
}

double elastic_net_kkt(const GramProblem& pr, const Vector& beta, double lambda, double alpha)
{
    const Vector grad = (pr.gram * beta - pr.xty) / pr.n + lambda * (1.0 - alpha) * beta;
    const double l1 = alpha * lambda;
    double worst = 0.0;
    for (Index k = 0; k < beta.size(); ++k) {
        double v;
        if (beta(k) > 0.0) v = std::abs(grad(k) + l1);
        else if (beta(k) < 0.0) v = std::abs(grad(k) - l1);
        else v = std::max(std::abs(grad(k)) - l1, 0.0);
        worst = std::max(worst, v);
    }
    return worst;
}

ElasticNetCV cross_validate_elastic_net(const Vector& y, const Matrix& X, const std::vector<double>& lambdas,
                                        double alpha, int folds, std::uint64_t seed, const ElasticNetConfig& config,
                                        const std::vector<int>* groups)
{
    const Index n = y.size();
    if (folds < 2 || folds > n) throw std::invalid_argument("cross-validation needs 2 <= folds <= n");
    if (groups && static_cast<Index>(groups->size()) != n) throw std::invalid_argument("one group id per row required");

    std::vector<int> group(static_cast<size_t>(n), 0);
    if (groups) group = *groups;
    const int num_groups = *std::max_element(group.begin(), group.end()) + 1;
    std::vector<int> fold(static_cast<size_t>(n));
    for (int g = 0; g < num_groups; ++g) {
        std::vector<Index> members;
        for (Index i = 0; i < n; ++i)
            if (group[static_cast<size_t>(i)] == g) members.push_back(i);
        const auto local = assign_folds(members.size(), folds, substream_seed(seed, "group-folds", static_cast<std::uint64_t>(g)));
        for (size_t m = 0; m < members.size(); ++m) fold[static_cast<size_t>(members[m])] = local[m];
    }

    // Training statistics by downdating the full Gram with the held-out rows,
    // then removing each group's training mean.
    const Index p = X.cols();
    const GramProblem full = GramProblem::from(y, X);
    Matrix x_sum_full = Matrix::Zero(num_groups, p);
    Vector y_sum_full = Vector::Zero(num_groups);
    Vector count_full = Vector::Zero(num_groups);
    for (Index i = 0; i < n; ++i) {
        const int g = group[static_cast<size_t>(i)];
        x_sum_full.row(g) += X.row(i);
        y_sum_full(g) += y(i);
        count_full(g) += 1.0;
    }

    ElasticNetCV cv;
    cv.lambdas = lambdas;
    cv.cv_error.assign(lambdas.size(), 0.0);
    for (int f = 0; f < folds; ++f) {
        std::vector<Index> test;
        for (Index i = 0; i < n; ++i)
            if (fold[static_cast<size_t>(i)] == f) test.push_back(i);
        Matrix Xh(static_cast<Index>(test.size()), p);
        Vector yh(static_cast<Index>(test.size()));
        Matrix x_mean = x_sum_full;
        Vector y_mean = y_sum_full;
        Vector count = count_full;
        for (size_t i = 0; i < test.size(); ++i) {
            const Index r = test[i];
            const int g = group[static_cast<size_t>(r)];
            Xh.row(static_cast<Index>(i)) = X.row(r);
            yh(static_cast<Index>(i)) = y(r);
            x_mean.row(g) -= X.row(r);
            y_mean(g) -= y(r);
            count(g) -= 1.0;
        }
        GramProblem train;
        train.n = static_cast<double>(n - static_cast<Index>(test.size()));
        train.gram = full.gram;
        if (!test.empty()) train.gram.noalias() -= Xh.transpose() * Xh;
        train.xty = full.xty - Xh.transpose() * yh;
        train.yty = full.yty - yh.squaredNorm();
        for (int g = 0; g < num_groups; ++g) {
            if (count(g) == 0.0) continue;
            x_mean.row(g) /= count(g);
            y_mean(g) /= count(g);
            const Vector xm = x_mean.row(g).transpose();
            train.gram.noalias() -= count(g) * xm * xm.transpose();
            train.xty -= count(g) * y_mean(g) * xm;
            train.yty -= count(g) * y_mean(g) * y_mean(g);
        }
        const auto path = elastic_net_path(train, lambdas, alpha, config);
        for (size_t l = 0; l < lambdas.size(); ++l) {
            for (Index i : test) {
                const int g = group[static_cast<size_t>(i)];
                const double intercept = y_mean(g) - x_mean.row(g).dot(path[l]);
                const double r = y(i) - intercept - X.row(i).dot(path[l]);
                cv.cv_error[l] += r * r;
            }
        }
    }
    for (auto& e : cv.cv_error) e /= static_cast<double>(n);
    cv.best = 0;
    for (size_t l = 1; l < lambdas.size(); ++l)
        if (cv.cv_error[l] < cv.cv_error[static_cast<size_t>(cv.best)]) cv.best = static_cast<Index>(l);
    return cv;
}

} // namespace heat
