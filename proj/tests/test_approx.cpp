#include <doctest.h>

#include <heat/approx.hpp>
#include <heat/elastic_net.hpp>
#include <heat/random.hpp>

#include "support.hpp"

using namespace heat;
using testing_support::max_rel;

namespace {

// n x p design with X'X = n I.
Matrix orthonormal_design(Index n, Index p, std::mt19937_64& rng)
{
    const Matrix g = testing_support::gaussian(n, p, rng);
    Eigen::HouseholderQR<Matrix> qr(g);
    return Matrix(qr.householderQ()).leftCols(p) * std::sqrt(static_cast<double>(n));
}

double soft(double z, double t)
{
    return z > t ? z - t : (z < -t ? z + t : 0.0);
}

SolverConfig tight()
{
    SolverConfig cfg;
    cfg.tol = 1e-13;
    cfg.kkt_tol = 1e-10;
    cfg.inner_kkt_tol = 1e-11;
    cfg.max_outer_iters = 5000;
    cfg.max_inner_iters = 5000;
    return cfg;
}

// the default stopping rule is on squared coordinate moves
ElasticNetConfig en_tight()
{
    ElasticNetConfig cfg;
    cfg.tol = 1e-26;
    return cfg;
}

} // namespace

TEST_CASE("elastic net without penalty is least squares")
{
    std::mt19937_64 rng(41);
    const Matrix X = testing_support::gaussian(40, 6, rng);
    const Vector y = testing_support::gaussian(40, 1, rng);
    const auto fit = elastic_net(y, X, 0.0, 0.5, en_tight());
    CHECK(fit.converged);
    CHECK((fit.beta - oracle::ols(y, X)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("elastic net null condition")
{
    std::mt19937_64 rng(42);
    const Matrix X = testing_support::gaussian(30, 5, rng);
    const Vector y = testing_support::gaussian(30, 1, rng);
    const auto prob = GramProblem::from(y, X);
    for (double alpha : {0.1, 0.5, 1.0}) {
        const double lmax = (X.transpose() * y).cwiseAbs().maxCoeff() / (30.0 * alpha);
        CHECK(elastic_net_lambda_max(prob, alpha) == doctest::Approx(lmax).epsilon(1e-14));
        CHECK(elastic_net(prob, lmax * 1.0001, alpha).beta.isZero(0.0));
        CHECK_FALSE(elastic_net(prob, lmax * 0.9, alpha).beta.isZero(0.0));
    }
}

TEST_CASE("orthonormal design has a closed form")
{
    std::mt19937_64 rng(43);
    const Matrix X = orthonormal_design(50, 6, rng);
    const Vector y = testing_support::gaussian(50, 1, rng) + X.col(0) * 0.8;
    const Vector z = X.transpose() * y / 50.0;
    for (double alpha : {1.0, 0.4}) {
        const double lambda = 0.1;
        const auto fit = elastic_net(y, X, lambda, alpha);
        for (Index k = 0; k < 6; ++k) {
            const double expect = soft(z(k), alpha * lambda) / (1.0 + lambda * (1.0 - alpha));
            CHECK(fit.beta(k) == doctest::Approx(expect).epsilon(1e-9));
        }
    }
}

TEST_CASE("elastic net solutions are stationary and paths match cold starts")
{
    std::mt19937_64 rng(44);
    const Matrix X = testing_support::gaussian(60, 25, rng);
    const Vector y = X.leftCols(3).rowwise().sum() + testing_support::gaussian(60, 1, rng);
    const auto prob = GramProblem::from(y, X);
    for (double alpha : {0.05, 0.5, 1.0}) {
        const auto lambdas = lambda_grid(elastic_net_lambda_max(prob, alpha), 10, 0.01);
        const auto path = elastic_net_path(prob, lambdas, alpha, en_tight());
        for (size_t i = 0; i < lambdas.size(); ++i) {
            CHECK(elastic_net_kkt(prob, path[i], lambdas[i], alpha) <= 1e-6);
            CHECK((path[i] - elastic_net(prob, lambdas[i], alpha, en_tight()).beta).cwiseAbs().maxCoeff() < 1e-6);
        }
    }
}

TEST_CASE("elastic net cross-validation")
{
    std::mt19937_64 rng(45);
    const Matrix X = testing_support::gaussian(50, 8, rng);
    const Vector y = X.col(0) * 2.0 + testing_support::gaussian(50, 1, rng);
    const auto grid = lambda_grid(elastic_net_lambda_max(GramProblem::from(y, X), 1.0), 20);
    const auto a = cross_validate_elastic_net(y, X, grid, 1.0, 5, 7);
    const auto b = cross_validate_elastic_net(y, X, grid, 1.0, 5, 7);
    CHECK(a.cv_error == b.cv_error);
    CHECK(a.best > 0);
    for (double e : a.cv_error) CHECK(e >= a.cv_error[static_cast<size_t>(a.best)]);

    // the Gram-downdated fold errors agree with refitting each fold from scratch
    const auto fold = assign_folds(50, 5, substream_seed(7, "group-folds", 0));
    std::vector<double> direct(grid.size(), 0.0);
    for (int f = 0; f < 5; ++f) {
        std::vector<Index> train, test;
        for (Index i = 0; i < 50; ++i) (fold[static_cast<size_t>(i)] == f ? test : train).push_back(i);
        Matrix Xt = X(train, Eigen::all);
        Vector yt = y(train);
        const Eigen::RowVectorXd xm = Xt.colwise().mean();
        const double ym = yt.mean();
        Xt.rowwise() -= xm;
        yt.array() -= ym;
        const auto path = elastic_net_path(GramProblem::from(yt, Xt), grid, 1.0);
        for (size_t l = 0; l < grid.size(); ++l)
            for (Index i : test) {
                const double pred = ym + (X.row(i) - xm).dot(path[l]);
                direct[l] += (y(i) - pred) * (y(i) - pred) / 50.0;
            }
    }
    for (size_t l = 0; l < grid.size(); ++l) CHECK(a.cv_error[l] == doctest::Approx(direct[l]).epsilon(1e-6));
}

TEST_CASE("natural lasso pilot")
{
    std::mt19937_64 rng(46);
    const Matrix X = orthonormal_design(60, 5, rng);
    Vector y = X.col(1) * 1.5 + testing_support::gaussian(60, 1, rng);
    y.array() -= y.mean();

    // phi beyond the null threshold
    const auto null = natural_lasso_sigma(y, X, {1e6}, 5, 1);
    CHECK(null.beta.isZero(0.0));
    CHECK(null.sigma2 == doctest::Approx(y.squaredNorm() / 60.0).epsilon(1e-14));

    // the identity evaluated by hand on the orthonormal closed form
    const Vector z = X.transpose() * y / 60.0;
    for (double phi : {0.05, 0.2, 0.5}) {
        const Vector beta = elastic_net(y, X, phi, 1.0).beta;
        double expect = y.squaredNorm() / 60.0;
        for (Index k = 0; k < 5; ++k) {
            const double b = soft(z(k), phi);
            expect -= 2.0 * z(k) * b - b * b - 2.0 * phi * std::abs(b);
        }
        CHECK(natural_lasso_value(y, X, beta, phi, PilotFormula::natural) == doctest::Approx(expect).epsilon(1e-10));
        CHECK(natural_lasso_value(y, X, beta, phi, PilotFormula::as_printed) ==
              doctest::Approx(expect / 2.0).epsilon(1e-10));
    }

    const auto grid = natural_lasso_grid(y, X, 20, 0.01);
    const auto entry = natural_lasso_sigma(y, X, grid, 5, 3);
    CHECK(entry.sigma2 == doctest::Approx(natural_lasso_value(y, X, entry.beta, entry.phi, PilotFormula::natural)));
    CHECK(entry.sigma2 > 0.5);
    CHECK(entry.sigma2 < 2.0);

    CHECK(parse_pilot_formula("natural") == PilotFormula::natural);
    CHECK(parse_pilot_formula("as_printed") == PilotFormula::as_printed);
    CHECK_THROWS_AS(parse_pilot_formula("other"), std::invalid_argument);
}

TEST_CASE("two-step fit with the true variances is the oracle fit")
{
    std::mt19937_64 rng(47);
    const auto data = MultiPopDataset::from_raw(testing_support::random_raw({40, 35}, 10, {1.0, 2.0}, rng));
    const auto params = PenaltyParams::for_dataset(data, 0.05, 0.02);
    const Vector sigma_true = (Vector(2) << 1.0, 2.0).finished();
    PilotVariances pilot;
    pilot.sigma_check = sigma_true;
    const HeatProblem problem(data);
    const auto app = fit_heat_approx(problem, params, tight(), pilot);
    const auto orc = fit_heat_oracle(data, params, tight(), sigma_true);
    CHECK(app.theta == orc.theta);
    CHECK(app.B_hat == orc.B_hat);
    CHECK(app.sigma_hat == sigma_true);
    CHECK(app.estimator == "heat-app");

    // with its own pilot the fit reports the pilot variances
    const auto own = fit_heat_approx(data, params);
    const auto pv = pilot_variances(data);
    CHECK(own.converged);
    CHECK(own.sigma_hat == pv.sigma_check);
    CHECK(pv.pilot_betas.size() == 2);
}

TEST_CASE("separate elastic net")
{
    std::mt19937_64 rng(48);
    auto raw = testing_support::random_raw({60}, 12, {1.0}, rng);
    auto twin = raw[0];
    twin.label = "Q";
    raw.push_back(twin);
    const auto data = MultiPopDataset::from_raw(raw);
    ElasticNetCVConfig cfg;
    cfg.folds = 5;
    cfg.grid_size = 20;
    const auto a = fit_sen(data, "P0", cfg), b = fit_sen(data, "Q", cfg);
    CHECK(a.B_hat == b.B_hat);
    CHECK(a.intercepts == b.intercepts);
    CHECK(a.labels == std::vector<std::string>{"P0"});
    CHECK_THROWS_AS(fit_sen(data, "nope"), std::invalid_argument);

    // SEN on the single-population dataset is the same fit
    const auto solo = MultiPopDataset::from_raw({raw[0]});
    CHECK(fit_sen(solo, "P0", cfg).B_hat == a.B_hat);

    // the coefficients are the elastic net at the selected point, back-transformed
    const auto& blk = data.population(0);
    const double lambda = a.params.lambda, alpha = a.params.gamma / a.params.lambda;
    const Vector beta = elastic_net(blk.y, blk.X, lambda, alpha).beta;
    CHECK(max_rel(a.B_hat.col(0), beta.cwiseQuotient(blk.column_scales)) < 1e-6);
}

TEST_CASE("pooled elastic net")
{
    std::mt19937_64 rng(49);
    auto raw = testing_support::random_raw({50}, 10, {1.0}, rng);
    auto twin = raw[0];
    twin.label = "Q";
    raw.push_back(twin);
    const auto data = MultiPopDataset::from_raw(raw);
    const auto aen = fit_aen(data);
    CHECK(aen.B_hat.col(0) == aen.B_hat.col(1));
    CHECK(aen.intercepts(0) == aen.intercepts(1));

    // stacking a population with itself leaves the objective unchanged, so
    // the pooled fit is the single-population elastic net at the chosen point
    const auto& blk = data.population(0);
    const double lambda = aen.params.lambda, alpha = aen.params.gamma / aen.params.lambda;
    const Vector beta = elastic_net(blk.y, blk.X, lambda, alpha).beta;
    CHECK(max_rel(aen.B_hat.col(0), beta.cwiseQuotient(blk.column_scales)) < 1e-6);
    CHECK_THROWS_AS(fit_aen(MultiPopDataset::from_raw({raw[0]})), std::invalid_argument);
}

TEST_CASE("separate elastic net keeps few false positives on pure noise")
{
    // n = 500, p = 200 predictors and no signal, 50 replicates
    double fp = 0.0;
    for (int rep = 0; rep < 50; ++rep) {
        std::mt19937_64 rng(1000 + static_cast<unsigned>(rep));
        RawPopulation r;
        r.label = "A";
        r.X = testing_support::gaussian(500, 200, rng);
        r.y = testing_support::gaussian(500, 1, rng);
        for (Index k = 0; k < 200; ++k) r.predictors.push_back(testing_support::name(k));
        const auto data = MultiPopDataset::from_raw({r});
        ElasticNetCVConfig cfg;
        cfg.seed = static_cast<std::uint64_t>(rep);
        const auto fit = fit_sen(data, "A", cfg);
        fp += static_cast<double>((fit.B_hat.array() != 0.0).count()) / 200.0;
    }
    MESSAGE("mean false-positive fraction " << fp / 50.0);
    CHECK(fp / 50.0 <= 0.05);
}
