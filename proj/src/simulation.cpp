#include <heat/simulation.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <boost/math/distributions/normal.hpp>

#include <heat/parallel.hpp>
#include <heat/random.hpp>

namespace heat {
namespace {

std::string predictor_name(Index k)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "snp%06ld", static_cast<long>(k + 1));
    return buf;
}

double sample_sd(const Eigen::Ref<const Vector>& v)
{
    if (v.size() < 2) return 0.0;
    const double mean = v.mean();
    return std::sqrt((v.array() - mean).square().sum() / static_cast<double>(v.size() - 1));
}

// Draws `count` distinct entries of pool without replacement (partial Fisher-Yates).
std::vector<Index> draw(std::vector<Index> pool, Index count, Rng& rng)
{
    if (count > static_cast<Index>(pool.size())) throw std::invalid_argument("not enough predictors to draw from");
    for (Index i = 0; i < count; ++i) {
        std::uniform_int_distribution<size_t> pick(static_cast<size_t>(i), pool.size() - 1);
        std::swap(pool[static_cast<size_t>(i)], pool[pick(rng)]);
    }
    pool.resize(static_cast<size_t>(count));
    std::sort(pool.begin(), pool.end());
    return pool;
}

// shortest text that reads back to the same double
std::string fmt(double v)
{
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string scenario_columns(Index id, const SimScenario& sc)
{
    std::ostringstream os;
    os << id << ',' << sc.p << ',' << sc.s << ',' << fmt(sc.q) << ',' << fmt(sc.snr) << ',' << fmt(sc.sigma_ratio) << ',';
    for (size_t j = 0; j < sc.n_per_pop.size(); ++j) os << (j ? ";" : "") << sc.n_per_pop[j];
    return os.str();
}

std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(s);
    while (std::getline(ss, cell, ',')) {
        const auto b = cell.find_first_not_of(" \t");
        const auto e = cell.find_last_not_of(" \t");
        out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
    }
    return out;
}

std::vector<double> to_doubles(const std::string& key, const std::string& s)
{
    std::vector<double> out;
    for (const auto& c : split_list(s)) {
        size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(c, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != c.size() || c.empty()) throw std::invalid_argument("'" + key + "': not a number: '" + c + "'");
        out.push_back(v);
    }
    return out;
}

} // namespace

SnrFormula parse_snr_formula(const std::string& s)
{
    if (s == "definition") return SnrFormula::definition;
    if (s == "as_printed" || s == "as-printed") return SnrFormula::as_printed;
    throw std::invalid_argument("unknown snr formula '" + s + "'");
}

void SimScenario::validate() const
{
    const Index J = num_populations();
    if (J < 1) throw std::invalid_argument("scenario needs at least one population");
    if (reference < 0 || reference >= J) throw std::invalid_argument("reference population out of range");
    if (static_cast<Index>(n_per_pop.size()) != J || static_cast<Index>(rho_ld.size()) != J ||
        static_cast<Index>(maf_range.size()) != J || static_cast<Index>(unavailable_fraction.size()) != J)
        throw std::invalid_argument("per-population scenario fields must have one entry per population");
    if (p < 1 || s < 0 || s > p) throw std::invalid_argument("need 0 <= s <= p");
    if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("q must lie in [0, 1]");
    if (!(snr > 0.0)) throw std::invalid_argument("snr must be positive");
    if (!(sigma_ratio > 0.0)) throw std::invalid_argument("sigma_ratio must be positive");
    if (!(sign_prob_positive >= 0.0 && sign_prob_positive <= 1.0)) throw std::invalid_argument("sign probability must lie in [0, 1]");
    for (Index j = 0; j < J; ++j) {
        if (n_per_pop[static_cast<size_t>(j)] < 2) throw std::invalid_argument("each population needs n >= 2");
        if (!(std::abs(rho_ld[static_cast<size_t>(j)]) < 1.0)) throw std::invalid_argument("LD correlation must lie in (-1, 1)");
        const auto [lo, hi] = maf_range[static_cast<size_t>(j)];
        if (!(lo > 0.0 && hi < 1.0 && lo <= hi)) throw std::invalid_argument("degenerate MAF range");
        const double f = unavailable_fraction[static_cast<size_t>(j)];
        if (!(f >= 0.0 && f < 1.0)) throw std::invalid_argument("unavailable fraction must lie in [0, 1)");
    }
    if (unavailable_fraction[static_cast<size_t>(reference)] != 0.0)
        throw std::invalid_argument("the reference population must have every predictor available");
}

Matrix gen_genotypes(const SimScenario& scenario, Index population, Index n, std::uint64_t seed)
{
    const auto j = static_cast<size_t>(population);
    const auto [lo, hi] = scenario.maf_range.at(j);
    if (!(lo > 0.0 && hi < 1.0 && lo <= hi)) throw std::invalid_argument("degenerate MAF range");
    const double ld = scenario.rho_ld.at(j);
    const Index p = scenario.p;

    Rng rng(seed);
    std::uniform_real_distribution<double> maf_dist(lo, hi);
    std::normal_distribution<double> normal(0.0, 1.0);
    const boost::math::normal_distribution<double> std_normal;
    Vector threshold(p);
    for (Index k = 0; k < p; ++k) {
        const double maf = lo == hi ? lo : maf_dist(rng);
        threshold(k) = boost::math::quantile(std_normal, maf);
    }
    const double innovation = std::sqrt(1.0 - ld * ld);
    Matrix X = Matrix::Zero(n, p);
    for (Index i = 0; i < n; ++i) {
        for (int hap = 0; hap < 2; ++hap) {
            double z = normal(rng);
            for (Index k = 0; k < p; ++k) {
                if (k > 0) z = ld * z + innovation * normal(rng);
                if (z < threshold(k)) X(i, k) += 1.0;
            }
        }
    }
    return X;
}

TrueModel gen_coefficients(const SimScenario& scenario, const std::vector<Vector>& genotype_sds, const Mask& available,
                           std::uint64_t seed)
{
    const Index J = scenario.num_populations(), p = scenario.p;
    if (static_cast<Index>(genotype_sds.size()) != J) throw std::invalid_argument("one SD vector per population required");
    Rng rng(seed);

    TrueModel truth;
    truth.available = available;
    truth.B_star = Matrix::Zero(p, J);
    const double exact_shared = static_cast<double>(scenario.s) * scenario.q;
    const Index n_shared = static_cast<Index>(std::floor(exact_shared + 1e-9));
    truth.dropped_shared = static_cast<Index>(std::llround(std::ceil(exact_shared - 1e-9))) - n_shared;

    auto usable = [&](Index k, Index j) {
        return available(k, j) && genotype_sds[static_cast<size_t>(j)](k) > 0.0;
    };
    std::vector<Index> pool;
    for (Index k = 0; k < p; ++k) {
        bool ok = true;
        for (Index j = 0; j < J; ++j) ok = ok && usable(k, j);
        if (ok) pool.push_back(k);
    }
    truth.shared = draw(pool, n_shared, rng);

    std::vector<bool> taken(static_cast<size_t>(p), false);
    for (Index k : truth.shared) taken[static_cast<size_t>(k)] = true;
    for (Index j = 0; j < J; ++j) {
        std::vector<Index> candidates;
        for (Index k = 0; k < p; ++k)
            if (!taken[static_cast<size_t>(k)] && usable(k, j)) candidates.push_back(k);
        if (static_cast<Index>(candidates.size()) < scenario.s - n_shared)
            throw std::invalid_argument("not enough predictors for disjoint population-specific supports");
        const auto specific = draw(candidates, scenario.s - n_shared, rng);
        for (Index k : specific) taken[static_cast<size_t>(k)] = true;
        std::vector<Index> support = truth.shared;
        support.insert(support.end(), specific.begin(), specific.end());
        std::sort(support.begin(), support.end());
        truth.supports.push_back(std::move(support));
    }

    std::bernoulli_distribution positive(scenario.sign_prob_positive);
    std::vector<double> shared_sign(static_cast<size_t>(p), 1.0);
    if (scenario.shared_signs)
        for (Index k : truth.shared) shared_sign[static_cast<size_t>(k)] = positive(rng) ? 1.0 : -1.0;
    const std::vector<bool> is_shared = [&] {
        std::vector<bool> v(static_cast<size_t>(p), false);
        for (Index k : truth.shared) v[static_cast<size_t>(k)] = true;
        return v;
    }();
    for (Index j = 0; j < J; ++j) {
        for (Index k : truth.supports[static_cast<size_t>(j)]) {
            double sign;
            if (scenario.shared_signs && is_shared[static_cast<size_t>(k)]) sign = shared_sign[static_cast<size_t>(k)];
            else sign = positive(rng) ? 1.0 : -1.0;
            truth.B_star(k, j) = sign / genotype_sds[static_cast<size_t>(j)](k);
        }
    }
    return truth;
}

std::vector<Vector> gen_responses(const SimScenario& scenario, const std::vector<Matrix>& X_by_pop, TrueModel& truth,
                                  std::uint64_t seed)
{
    const Index J = scenario.num_populations();
    const Index ref = scenario.reference;
    const Vector signal_ref = X_by_pop[static_cast<size_t>(ref)] * truth.B_star.col(ref);
    const double sd = sample_sd(signal_ref);
    if (!(sd > 0.0)) throw std::invalid_argument("gen_responses: reference signal has zero variance");
    const double sigma_ref = scenario.snr_formula == SnrFormula::definition ? sd / std::sqrt(scenario.snr)
                                                                            : sd * std::sqrt(scenario.snr);
    truth.sigma_star.resize(J);
    truth.intercepts.resize(J);
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Index j = 0; j < J; ++j) {
        truth.sigma_star(j) = j == ref ? sigma_ref : scenario.sigma_ratio * sigma_ref;
        truth.intercepts(j) = normal(rng);
    }
    std::vector<Vector> ys;
    for (Index j = 0; j < J; ++j) {
        const Matrix& X = X_by_pop[static_cast<size_t>(j)];
        Vector y = (X * truth.B_star.col(j)).array() + truth.intercepts(j);
        for (Index i = 0; i < y.size(); ++i) y(i) += truth.sigma_star(j) * normal(rng);
        ys.push_back(std::move(y));
    }
    return ys;
}

SimReplicate generate_replicate(const SimScenario& scenario, Index replicate)
{
    scenario.validate();
    const Index J = scenario.num_populations(), p = scenario.p;
    const auto rep = static_cast<std::uint64_t>(replicate);

    Mask available = Mask::Constant(p, J, true);
    {
        Rng rng(substream_seed(scenario.seed, "availability", rep));
        std::vector<Index> all(static_cast<size_t>(p));
        std::iota(all.begin(), all.end(), Index{0});
        for (Index j = 0; j < J; ++j) {
            const auto count = static_cast<Index>(std::floor(scenario.unavailable_fraction[static_cast<size_t>(j)] * static_cast<double>(p)));
            for (Index k : draw(all, count, rng)) available(k, j) = false;
        }
    }

    std::vector<Matrix> X_train, X_test;
    std::vector<Vector> sds;
    for (Index j = 0; j < J; ++j) {
        const auto uj = static_cast<std::uint64_t>(j);
        Matrix Xtr = gen_genotypes(scenario, j, scenario.n_per_pop[static_cast<size_t>(j)], substream_seed(scenario.seed, "genotypes", rep, uj));
        Matrix Xte = gen_genotypes(scenario, j, scenario.n_test, substream_seed(scenario.seed, "test-genotypes", rep, uj));
        Vector sd(p);
        for (Index k = 0; k < p; ++k) {
            if (!available(k, j)) {
                Xtr.col(k).setZero();
                Xte.col(k).setZero();
            }
            sd(k) = available(k, j) ? sample_sd(Xtr.col(k)) : 0.0;
        }
        X_train.push_back(std::move(Xtr));
        X_test.push_back(std::move(Xte));
        sds.push_back(std::move(sd));
    }

    SimReplicate out;
    out.truth = gen_coefficients(scenario, sds, available, substream_seed(scenario.seed, "coefficients", rep));
    const auto y_train = gen_responses(scenario, X_train, out.truth, substream_seed(scenario.seed, "noise", rep));

    std::vector<Vector> y_test;
    {
        Rng rng(substream_seed(scenario.seed, "test-noise", rep));
        std::normal_distribution<double> normal(0.0, 1.0);
        for (Index j = 0; j < J; ++j) {
            Vector y = (X_test[static_cast<size_t>(j)] * out.truth.B_star.col(j)).array() + out.truth.intercepts(j);
            for (Index i = 0; i < y.size(); ++i) y(i) += out.truth.sigma_star(j) * normal(rng);
            y_test.push_back(std::move(y));
        }
    }

    auto to_raw = [&](const std::vector<Matrix>& Xs, const std::vector<Vector>& ys) {
        std::vector<RawPopulation> raw;
        for (Index j = 0; j < J; ++j) {
            RawPopulation r;
            r.label = scenario.labels[static_cast<size_t>(j)];
            r.y = ys[static_cast<size_t>(j)];
            std::vector<Index> cols;
            for (Index k = 0; k < p; ++k)
                if (available(k, j)) cols.push_back(k);
            r.X.resize(r.y.size(), static_cast<Index>(cols.size()));
            for (size_t c = 0; c < cols.size(); ++c) {
                r.X.col(static_cast<Index>(c)) = Xs[static_cast<size_t>(j)].col(cols[c]);
                r.predictors.push_back(predictor_name(cols[c]));
            }
            raw.push_back(std::move(r));
        }
        return raw;
    };
    out.train = MultiPopDataset::from_raw(to_raw(X_train, y_train));
    out.test = MultiPopDataset::from_raw(to_raw(X_test, y_test));
    out.X_train = std::move(X_train);
    return out;
}

ExperimentResults run_experiment(const std::vector<SimScenario>& grid, const ExperimentConfig& config)
{
    for (const auto& sc : grid) sc.validate();
    for (const auto& e : config.estimators)
        if (e != "sen" && e != "aen") (void)parse_estimator(e);

    struct Cell
    {
        std::vector<ResultRow> rows;
        std::vector<std::string> failures;
        std::map<std::string, double> seconds;
    };
    const size_t reps = static_cast<size_t>(std::max(config.replicates, 0));
    std::vector<Cell> cells(grid.size() * reps);

    parallel_for(cells.size(), config.threads, [&](size_t c) {
        const Index scenario_id = static_cast<Index>(c / reps);
        const Index replicate = static_cast<Index>(c % reps);
        const SimScenario& sc = grid[static_cast<size_t>(scenario_id)];
        Cell& cell = cells[c];
        SimReplicate rep;
        try {
            rep = generate_replicate(sc, replicate);
        } catch (const std::exception& e) {
            cell.failures.push_back("scenario " + std::to_string(scenario_id) + " replicate " + std::to_string(replicate) +
                                    " generation: " + e.what());
            return;
        }
        std::vector<Index> focus;
        for (Index j = 0; j < sc.num_populations(); ++j) {
            const auto& label = sc.labels[static_cast<size_t>(j)];
            if (config.focus.empty() || std::find(config.focus.begin(), config.focus.end(), label) != config.focus.end())
                focus.push_back(j);
        }
        const auto rep_seed = substream_seed(sc.seed, "cv", static_cast<std::uint64_t>(replicate));

        for (const auto& name : config.estimators) {
            const auto start = std::chrono::steady_clock::now();
            try {
                // fit column for each focus population
                std::vector<std::pair<Index, FitResult>> fits;
                if (name == "sen") {
                    ElasticNetCVConfig en = config.elastic_net;
                    en.seed = rep_seed;
                    for (Index j : focus) fits.emplace_back(j, fit_sen(rep.train, sc.labels[static_cast<size_t>(j)], en));
                } else if (name == "aen") {
                    ElasticNetCVConfig en = config.elastic_net;
                    en.seed = rep_seed;
                    FitResult f = fit_aen(rep.train, en);
                    for (Index j : focus) fits.emplace_back(j, f);
                } else {
                    CVPlan plan = config.cv;
                    plan.seed = rep_seed;
                    plan.threads = 1;
                    CVOptions opts = config.cv_options;
                    opts.sigma_true = rep.truth.sigma_star;
                    opts.pilot.seed = substream_seed(rep_seed, "pilot");
                    auto outcome = cross_validate(rep.train, parse_estimator(name), plan, opts);
                    for (Index j : focus) fits.emplace_back(j, outcome.fit);
                }
                for (const auto& [j, fit] : fits) {
                    const auto& label = sc.labels[static_cast<size_t>(j)];
                    const auto col_it = std::find(fit.labels.begin(), fit.labels.end(), label);
                    const Index col = static_cast<Index>(col_it - fit.labels.begin());
                    const Vector beta = fit.B_hat.col(col);
                    const Vector r2 = test_r2(fit, rep.test);
                    auto push = [&](const std::string& metric, double value) {
                        cell.rows.push_back(ResultRow{scenario_id, sc, replicate, name, label, metric, value});
                    };
                    push("rmse", rmse(beta, rep.truth.B_star.col(j)));
                    push("rme", rme(beta, rep.truth.B_star.col(j), rep.X_train[static_cast<size_t>(j)]));
                    push("test_r2", r2(col));
                    push("sigma_hat", fit.sigma_hat(col));
                    push("support", static_cast<double>((beta.array() != 0.0).count()));
                }
            } catch (const std::exception& e) {
                cell.failures.push_back("scenario " + std::to_string(scenario_id) + " replicate " +
                                        std::to_string(replicate) + " " + name + ": " + e.what());
            }
            cell.seconds[name] += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        }
    });

    ExperimentResults res;
    for (auto& cell : cells) {
        res.rows.insert(res.rows.end(), cell.rows.begin(), cell.rows.end());
        res.failures.insert(res.failures.end(), cell.failures.begin(), cell.failures.end());
        for (const auto& [k, v] : cell.seconds) res.seconds[k] += v;
    }
    return res;
}

void write_results(std::ostream& out, const std::vector<ResultRow>& rows)
{
    out << "scenario,p,s,q,snr,sigma_ratio,n,replicate,estimator,population,metric,value\n";
    for (const auto& r : rows)
        out << scenario_columns(r.scenario, r.config) << ',' << r.replicate << ',' << r.estimator << ',' << r.population
            << ',' << r.metric << ',' << fmt(r.value) << '\n';
}

double quantile(std::vector<double> values, double prob)
{
    if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * prob;
    const auto lo = static_cast<size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows)
{
    using Key = std::tuple<Index, std::string, std::string, std::string>;
    std::vector<Key> order;
    std::map<Key, std::vector<double>> groups;
    std::map<Index, SimScenario> scenarios;
    // (scenario, replicate, population, metric) -> estimator -> value
    std::map<std::tuple<Index, Index, std::string, std::string>, std::map<std::string, double>> paired;
    for (const auto& r : rows) {
        Key key{r.scenario, r.estimator, r.population, r.metric};
        auto [it, fresh] = groups.try_emplace(key);
        if (fresh) order.push_back(key);
        it->second.push_back(r.value);
        scenarios.emplace(r.scenario, r.config);
        paired[{r.scenario, r.replicate, r.population, r.metric}][r.estimator] = r.value;
    }

    const std::vector<std::pair<std::string, std::string>> ratios = {
        {"heat", "reheat"}, {"heat-app", "heat"}, {"heat", "sen"}};
    for (const auto& [key, by_est] : paired) {
        const auto& [scenario, replicate, population, metric] = key;
        if (metric != "rmse" && metric != "rme") continue;
        for (const auto& [a, b] : ratios) {
            const auto ia = by_est.find(a), ib = by_est.find(b);
            if (ia == by_est.end() || ib == by_est.end() || ib->second == 0.0) continue;
            Key gk{scenario, a + "/" + b, population, metric};
            auto [it, fresh] = groups.try_emplace(gk);
            if (fresh) order.push_back(gk);
            it->second.push_back(ia->second / ib->second);
        }
    }

    std::vector<SummaryRow> out;
    for (const auto& key : order) {
        const auto& v = groups.at(key);
        SummaryRow s;
        std::tie(s.scenario, s.estimator, s.population, s.metric) = key;
        s.config = scenarios.at(s.scenario);
        s.q1 = quantile(v, 0.25);
        s.median = quantile(v, 0.5);
        s.q3 = quantile(v, 0.75);
        s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        s.count = static_cast<Index>(v.size());
        out.push_back(std::move(s));
    }
    return out;
}

void write_summary(std::ostream& out, const std::vector<SummaryRow>& rows)
{
    out << "scenario,p,s,q,snr,sigma_ratio,n,estimator,population,metric,Q1,Q2,Q3,Avg,count\n";
    for (const auto& r : rows)
        out << scenario_columns(r.scenario, r.config) << ',' << r.estimator << ',' << r.population << ',' << r.metric
            << ',' << fmt(r.q1) << ',' << fmt(r.median) << ',' << fmt(r.q3) << ',' << fmt(r.mean) << ',' << r.count
            << '\n';
}

double mann_whitney_p(const std::vector<double>& a, const std::vector<double>& b)
{
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    if (a.empty() || b.empty()) throw std::invalid_argument("mann_whitney_p: empty sample");
    std::vector<std::pair<double, int>> all;
    for (double v : a) all.emplace_back(v, 0);
    for (double v : b) all.emplace_back(v, 1);
    std::sort(all.begin(), all.end());
    double rank_sum_a = 0.0, tie_term = 0.0;
    for (size_t i = 0; i < all.size();) {
        size_t j = i;
        while (j < all.size() && all[j].first == all[i].first) ++j;
        const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
        const double t = static_cast<double>(j - i);
        tie_term += t * t * t - t;
        for (size_t k = i; k < j; ++k)
            if (all[k].second == 0) rank_sum_a += avg_rank;
        i = j;
    }
    const double u = rank_sum_a - na * (na + 1.0) / 2.0;
    const double n = na + nb;
    const double mean = na * nb / 2.0;
    const double var = na * nb / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if (var <= 0.0) return 1.0;
    const double z = (std::abs(u - mean) - 0.5) / std::sqrt(var);   // continuity correction
    return std::min(1.0, std::erfc(std::max(z, 0.0) / std::sqrt(2.0)));
}

SimulationFile parse_simulation_config(std::istream& in, const std::string& source)
{
    SimScenario base;
    std::vector<double> qs{base.q}, snrs{base.snr}, ratios{base.sigma_ratio};
    SimulationFile file;
    std::string line;
    int line_no = 0;
    auto fail = [&](const std::string& msg) {
        throw std::invalid_argument(source + ":" + std::to_string(line_no) + ": " + msg);
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto eq = line.find('=');
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        if (eq == std::string::npos) fail("expected 'key = value'");
        auto strip = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = strip(line.substr(0, eq));
        const std::string value = strip(line.substr(eq + 1));
        try {
            auto one = [&] {
                const auto v = to_doubles(key, value);
                if (v.size() != 1) fail("'" + key + "' takes a single value");
                return v.front();
            };
            if (key == "p") base.p = static_cast<Index>(one());
            else if (key == "s") base.s = static_cast<Index>(one());
            else if (key == "q") qs = to_doubles(key, value);
            else if (key == "snr") snrs = to_doubles(key, value);
            else if (key == "sigma_ratio") ratios = to_doubles(key, value);
            else if (key == "labels") base.labels = split_list(value);
            else if (key == "reference") {
                const auto labels = base.labels;
                const auto it = std::find(labels.begin(), labels.end(), value);
                if (it == labels.end()) fail("reference '" + value + "' is not among the labels");
                base.reference = static_cast<Index>(it - labels.begin());
            } else if (key == "n") {
                base.n_per_pop.clear();
                for (double v : to_doubles(key, value)) base.n_per_pop.push_back(static_cast<Index>(v));
            } else if (key == "n_test") base.n_test = static_cast<Index>(one());
            else if (key == "rho_ld") base.rho_ld = to_doubles(key, value);
            else if (key == "maf_min" || key == "maf_max") {
                const auto v = to_doubles(key, value);
                base.maf_range.resize(v.size(), {0.05, 0.5});
                for (size_t j = 0; j < v.size(); ++j)
                    (key == "maf_min" ? base.maf_range[j].first : base.maf_range[j].second) = v[j];
            } else if (key == "unavailable_fraction") base.unavailable_fraction = to_doubles(key, value);
            else if (key == "sign_prob_positive") base.sign_prob_positive = one();
            else if (key == "shared_signs") base.shared_signs = value == "true" || value == "1";
            else if (key == "snr_formula") base.snr_formula = parse_snr_formula(value);
            else if (key == "seed") base.seed = static_cast<std::uint64_t>(std::stoull(value));
            else file.extras[key] = value;
        } catch (const std::invalid_argument& e) {
            const std::string what = e.what();
            if (what.rfind(source, 0) == 0) throw;
            fail(what);
        }
    }
    for (double q : qs)
        for (double snr : snrs)
            for (double ratio : ratios) {
                SimScenario sc = base;
                sc.q = q;
                sc.snr = snr;
                sc.sigma_ratio = ratio;
                sc.validate();
                file.grid.push_back(std::move(sc));
            }
    return file;
}

SimulationFile read_simulation_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw std::invalid_argument(path.string() + ": cannot open scenario config");
    return parse_simulation_config(in, path.string());
}

} // namespace heat
