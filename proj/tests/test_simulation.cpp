#include <doctest.h>

#include <set>
#include <sstream>

#include <heat/simulation.hpp>

#include "support.hpp"

using namespace heat;

namespace {

SimScenario small_scenario()
{
    SimScenario sc;
    sc.p = 40;
    sc.s = 6;
    sc.q = 0.5;
    sc.n_per_pop = {120, 100};
    sc.n_test = 80;
    return sc;
}

std::vector<Vector> unit_sds(const SimScenario& sc)
{
    return std::vector<Vector>(static_cast<size_t>(sc.num_populations()), Vector::Ones(sc.p));
}

double correlation(const Vector& a, const Vector& b)
{
    const Vector ca = a.array() - a.mean(), cb = b.array() - b.mean();
    return ca.dot(cb) / std::sqrt(ca.squaredNorm() * cb.squaredNorm());
}

ExperimentConfig quick_config(std::vector<std::string> estimators, int replicates)
{
    ExperimentConfig cfg;
    cfg.estimators = std::move(estimators);
    cfg.replicates = replicates;
    cfg.cv.folds = 3;
    cfg.cv.grid_size = 6;
    cfg.cv.gamma_ratios = {0.0, 0.5};
    cfg.cv_options.pilot.folds = 3;
    cfg.cv_options.pilot.grid_size = 10;
    cfg.elastic_net.folds = 3;
    cfg.elastic_net.grid_size = 8;
    cfg.elastic_net.alphas = {0.5, 1.0};
    return cfg;
}

} // namespace

TEST_CASE("independent haplotypes give nearly uncorrelated columns")
{
    SimScenario sc = small_scenario();
    sc.p = 30;
    sc.rho_ld = {0.0, 0.0};
    const Matrix X = gen_genotypes(sc, 0, 2000, 7);
    int small = 0, pairs = 0;
    for (Index a = 0; a < sc.p; ++a)
        for (Index b = a + 1; b < sc.p; ++b) {
            ++pairs;
            if (std::abs(correlation(X.col(a), X.col(b))) <= 0.1) ++small;
        }
    CHECK(small >= 0.95 * pairs);

    // with LD, neighbours correlate positively on average
    sc.rho_ld = {0.9, 0.9};
    const Matrix L = gen_genotypes(sc, 0, 2000, 7);
    double mean_r = 0.0;
    for (Index k = 0; k + 1 < sc.p; ++k) mean_r += correlation(L.col(k), L.col(k + 1)) / static_cast<double>(sc.p - 1);
    CHECK(mean_r > 0.3);
}

TEST_CASE("dosages at allele frequency one half")
{
    SimScenario sc = small_scenario();
    sc.maf_range = {{0.5, 0.5}, {0.5, 0.5}};
    const Matrix X = gen_genotypes(sc, 1, 5000, 3);
    CHECK(std::abs(X.mean() - 1.0) <= 0.05);
    CHECK(((X.array() == 0.0) || (X.array() == 1.0) || (X.array() == 2.0)).all());
    CHECK(gen_genotypes(sc, 1, 50, 3) == gen_genotypes(sc, 1, 50, 3));
    CHECK(gen_genotypes(sc, 1, 50, 3) != gen_genotypes(sc, 1, 50, 4));
}

TEST_CASE("support sharing")
{
    SimScenario sc = small_scenario();
    const Mask all = Mask::Constant(sc.p, 2, true);
    sc.q = 1.0;
    const auto same = gen_coefficients(sc, unit_sds(sc), all, 1);
    CHECK(same.supports[0] == same.supports[1]);
    CHECK(same.supports[0].size() == static_cast<size_t>(sc.s));

    sc.q = 0.0;
    sc.s = 5;
    sc.p = 10;
    const auto apart = gen_coefficients(sc, unit_sds(sc), Mask::Constant(10, 2, true), 2);
    REQUIRE(apart.supports[0].size() == 5);
    REQUIRE(apart.supports[1].size() == 5);
    std::set<Index> both(apart.supports[0].begin(), apart.supports[0].end());
    both.insert(apart.supports[1].begin(), apart.supports[1].end());
    CHECK(both.size() == 10);

    // a fractional shared count is rounded down and recorded
    sc = small_scenario();
    sc.s = 5;
    sc.q = 0.5;
    const auto frac = gen_coefficients(sc, unit_sds(sc), all, 3);
    CHECK(frac.shared.size() == 2);
    CHECK(frac.dropped_shared == 1);
}

TEST_CASE("magnitudes and sign frequency")
{
    SimScenario sc = small_scenario();
    sc.p = 100;
    sc.s = 20;
    sc.q = 0.8;
    std::vector<Vector> sds = {Vector::LinSpaced(100, 0.2, 1.0), Vector::LinSpaced(100, 0.4, 0.9)};
    long positive = 0, total = 0;
    for (int draw = 0; draw < 250; ++draw) {
        const auto t = gen_coefficients(sc, sds, Mask::Constant(100, 2, true), static_cast<std::uint64_t>(draw));
        for (Index j = 0; j < 2; ++j)
            for (Index k : t.supports[static_cast<size_t>(j)]) {
                CHECK(std::abs(t.B_star(k, j)) == doctest::Approx(1.0 / sds[static_cast<size_t>(j)](k)).epsilon(1e-15));
                positive += t.B_star(k, j) > 0.0;
                ++total;
            }
    }
    REQUIRE(total == 10000);
    CHECK(std::abs(static_cast<double>(positive) / static_cast<double>(total) - 0.8) <= 0.03);

    sc.shared_signs = true;
    const auto t = gen_coefficients(sc, sds, Mask::Constant(100, 2, true), 5);
    for (Index k : t.shared) CHECK((t.B_star(k, 0) > 0) == (t.B_star(k, 1) > 0));
}

TEST_CASE("unavailable predictors are never in a support")
{
    SimScenario sc = small_scenario();
    sc.unavailable_fraction = {0.3, 0.0};
    for (Index r = 0; r < 5; ++r) {
        const auto rep = generate_replicate(sc, r);
        const Mask& m = rep.truth.available;
        CHECK((m.col(0).count()) == sc.p - 12);
        CHECK(m.col(1).all());
        for (Index k = 0; k < sc.p; ++k)
            if (!m(k, 0)) {
                CHECK(rep.truth.B_star(k, 0) == 0.0);
                CHECK(rep.X_train[0].col(k).isZero(0.0));
            }
        CHECK(rep.train.availability() == m);
        CHECK(rep.train.num_predictors() == sc.p);
    }
    sc.unavailable_fraction = {0.0, 0.2};
    CHECK_THROWS_AS(sc.validate(), std::invalid_argument);
}

TEST_CASE("signal to noise and variance ratios")
{
    SimScenario sc = small_scenario();
    sc.snr = 1.0;
    sc.sigma_ratio = 1.0;
    sc.n_per_pop = {2000, 2000};
    std::vector<Matrix> X = {gen_genotypes(sc, 0, 2000, 1), gen_genotypes(sc, 1, 2000, 2)};
    std::vector<Vector> sds;
    for (const auto& x : X) {
        Vector sd(sc.p);
        for (Index k = 0; k < sc.p; ++k) {
            const Vector c = x.col(k).array() - x.col(k).mean();
            sd(k) = std::sqrt(c.squaredNorm() / 1999.0);
        }
        sds.push_back(sd);
    }
    auto truth = gen_coefficients(sc, sds, Mask::Constant(sc.p, 2, true), 3);
    const auto ys = gen_responses(sc, X, truth, 4);
    CHECK(truth.sigma_star(0) == truth.sigma_star(1));

    const Vector signal = X[1] * truth.B_star.col(1);
    const Vector noise = ys[1] - signal - Vector::Constant(2000, truth.intercepts(1));
    const auto var = [](const Vector& v) { return (v.array() - v.mean()).square().sum() / static_cast<double>(v.size() - 1); };
    CHECK(std::abs(var(signal) / var(noise) - 1.0) <= 0.1);

    // doubling every coefficient doubles the reference noise level
    auto doubled = truth;
    doubled.B_star *= 2.0;
    gen_responses(sc, X, doubled, 4);
    CHECK(doubled.sigma_star(1) == doctest::Approx(2.0 * truth.sigma_star(1)).epsilon(1e-14));

    sc.sigma_ratio = 2.5;
    auto scaled = truth;
    gen_responses(sc, X, scaled, 4);
    CHECK(scaled.sigma_star(0) == doctest::Approx(2.5 * scaled.sigma_star(1)).epsilon(1e-15));

    sc.snr_formula = SnrFormula::as_printed;
    sc.snr = 4.0;
    auto printed = truth;
    gen_responses(sc, X, printed, 4);
    CHECK(printed.sigma_star(1) == doctest::Approx(2.0 * truth.sigma_star(1)).epsilon(1e-14));
}

TEST_CASE("replicates are reproducible")
{
    const SimScenario sc = small_scenario();
    const auto a = generate_replicate(sc, 3), b = generate_replicate(sc, 3), c = generate_replicate(sc, 4);
    CHECK(a.X_train[0] == b.X_train[0]);
    CHECK(a.truth.B_star == b.truth.B_star);
    CHECK(a.train.population(1).y == b.train.population(1).y);
    CHECK(a.test.population(0).y == b.test.population(0).y);
    CHECK(a.X_train[0] != c.X_train[0]);
    CHECK(a.train.population(0).n() == 120);
    CHECK(a.test.population(1).n() == 80);
}

TEST_CASE("scenario configuration files")
{
    std::istringstream in("# grid\np = 50\ns = 4\nq = 0.6, 0.9\nsigma_ratio = 1,2,3\nn = 90, 80\nreplicates = 3\n");
    const auto file = parse_simulation_config(in, "grid.cfg");
    REQUIRE(file.grid.size() == 6);
    CHECK(file.grid[0].q == 0.6);
    CHECK(file.grid[5].q == 0.9);
    CHECK(file.grid[5].sigma_ratio == 3.0);
    CHECK(file.grid[2].p == 50);
    CHECK(file.grid[2].n_per_pop == std::vector<Index>{90, 80});
    CHECK(file.extras.at("replicates") == "3");

    std::istringstream bad("p = 50\nq = lots\n");
    try {
        parse_simulation_config(bad, "bad.cfg");
        FAIL("expected a parse error");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).rfind("bad.cfg:2:", 0) == 0);
    }
    std::istringstream no_eq("p 50\n");
    CHECK_THROWS_AS(parse_simulation_config(no_eq), std::invalid_argument);
    CHECK(parse_snr_formula("as_printed") == SnrFormula::as_printed);
}

TEST_CASE("experiment tables")
{
    const SimScenario sc = small_scenario();
    const auto res = run_experiment({sc}, quick_config({"sen"}, 1));
    CHECK(res.failures.empty());
    std::map<std::string, int> per_metric;
    for (const auto& r : res.rows) ++per_metric[r.metric];
    CHECK(per_metric.size() == 5);
    for (const auto& [metric, count] : per_metric) CHECK(count == 2);

    const auto two = run_experiment({sc}, quick_config({"heat", "heat-app", "reheat", "sen"}, 2));
    CHECK(two.failures.empty());
    std::map<std::pair<std::string, std::string>, int> cells;
    for (const auto& r : two.rows) ++cells[{r.estimator, r.metric}];
    for (const auto& [key, count] : cells) CHECK(count == 4);
    CHECK(two.seconds.size() == 4);

    const auto again = run_experiment({sc}, quick_config({"heat", "heat-app", "reheat", "sen"}, 2));
    std::ostringstream a, b;
    write_results(a, two.rows);
    write_results(b, again.rows);
    CHECK(a.str() == b.str());
    CHECK(a.str().rfind("scenario,p,s,q,snr,sigma_ratio,n,replicate,estimator,population,metric,value\n", 0) == 0);

    const auto summary = summarize(two.rows);
    bool has_ratio = false;
    for (const auto& s : summary) {
        if (s.estimator == "heat/reheat" && s.metric == "rmse") has_ratio = true;
        if (s.estimator == "heat" && s.metric == "rmse") CHECK(s.count == 2);
    }
    CHECK(has_ratio);
    std::ostringstream sum;
    write_summary(sum, summary);
    CHECK(sum.str().find(",Q1,Q2,Q3,Avg,count\n") != std::string::npos);

    ExperimentConfig focus = quick_config({"sen"}, 1);
    focus.focus = {"AA"};
    for (const auto& r : run_experiment({sc}, focus).rows) CHECK(r.population == "AA");
    CHECK_THROWS_AS(run_experiment({sc}, quick_config({"lasso"}, 1)), std::invalid_argument);
}

TEST_CASE("the oracle estimator nearly interpolates noiseless data")
{
    SimScenario sc = small_scenario();
    sc.snr = 1e6;
    sc.n_per_pop = {200, 200};
    ExperimentConfig cfg = quick_config({"heat-oracle"}, 1);
    cfg.cv.grid_size = 20;
    cfg.cv.grid_min_ratio = 1e-4;
    const auto res = run_experiment({sc}, cfg);
    CHECK(res.failures.empty());
    for (const auto& r : res.rows)
        if (r.metric == "rmse") CHECK(r.value < 0.01);
}

TEST_CASE("summary statistics")
{
    CHECK(quantile({4.0, 1.0, 3.0, 2.0}, 0.25) == doctest::Approx(1.75));
    CHECK(quantile({4.0, 1.0, 3.0, 2.0}, 0.5) == doctest::Approx(2.5));
    CHECK(quantile({5.0}, 0.75) == 5.0);

    CHECK(mann_whitney_p({1, 2, 3}, {1, 2, 3}) == doctest::Approx(1.0));
    // U = 0, mean 4.5, variance 3*3*7/12, continuity corrected
    const double z = (4.5 - 0.5) / std::sqrt(9.0 * 7.0 / 12.0);
    CHECK(mann_whitney_p({1, 2, 3}, {4, 5, 6}) == doctest::Approx(std::erfc(z / std::sqrt(2.0))).epsilon(1e-12));
    CHECK(mann_whitney_p({4, 5, 6}, {1, 2, 3}) == doctest::Approx(mann_whitney_p({1, 2, 3}, {4, 5, 6})));
}
