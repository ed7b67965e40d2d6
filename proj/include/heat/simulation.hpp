#pragma once
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <heat/approx.hpp>
#include <heat/dataset.hpp>
#include <heat/tuning.hpp>

namespace heat {

/// definition: sigma_ref = SD(signal) / sqrt(SNR), so Var(signal)/Var(noise) = SNR.
/// as_printed: sigma_ref = SD(signal) * sqrt(SNR).
enum class SnrFormula { definition, as_printed };

SnrFormula parse_snr_formula(const std::string& s);

struct SimScenario
{
    Index p = 200;
    std::vector<std::string> labels = {"AA", "EA"};
    Index reference = 1;                       // population whose SNR is fixed
    Index s = 20;                              // nonzeros per population
    double q = 0.8;                            // shared fraction of the support
    double snr = 1.0;
    double sigma_ratio = 1.0;                  // sigma_j / sigma_reference for j != reference
    std::vector<Index> n_per_pop = {1000, 850};
    Index n_test = 500;                        // per population
    std::vector<double> rho_ld = {0.4, 0.7};
    std::vector<std::pair<double, double>> maf_range = {{0.05, 0.5}, {0.05, 0.5}};
    std::vector<double> unavailable_fraction = {0.0, 0.0};
    double sign_prob_positive = 0.8;
    bool shared_signs = false;
    SnrFormula snr_formula = SnrFormula::definition;
    std::uint64_t seed = 1;

    Index num_populations() const { return static_cast<Index>(labels.size()); }
    /// Throws std::invalid_argument on inconsistent fields.
    void validate() const;
};

/// Dosages in {0,1,2}: two thresholded AR(1) Gaussian haplotypes per subject,
/// MAF per SNP uniform in the population's range.
Matrix gen_genotypes(const SimScenario& scenario, Index population, Index n, std::uint64_t seed);

struct TrueModel
{
    Matrix B_star;                             // raw genotype units, p x J
    Vector sigma_star;
    Vector intercepts;
    std::vector<std::vector<Index>> supports;  // sorted, per population
    std::vector<Index> shared;                 // indices nonzero in every population
    Mask available;                            // p x J
    Index dropped_shared = 0;                  // s*q - floor(s*q), rounded away
};

/// Supports, signs and magnitudes 1/SD(SNP) per population. Predictors that
/// are unavailable or constant in a population are never selected there.
TrueModel gen_coefficients(const SimScenario& scenario, const std::vector<Vector>& genotype_sds, const Mask& available,
                           std::uint64_t seed);

/// sigma_star from the SNR rule; intercepts ~ N(0,1). Fills truth.sigma_star and
/// truth.intercepts and returns one response vector per population.
std::vector<Vector> gen_responses(const SimScenario& scenario, const std::vector<Matrix>& X_by_pop, TrueModel& truth,
                                  std::uint64_t seed);

struct SimReplicate
{
    MultiPopDataset train;
    MultiPopDataset test;
    std::vector<Matrix> X_train;               // raw p-column designs (unavailable columns zero)
    TrueModel truth;
};

SimReplicate generate_replicate(const SimScenario& scenario, Index replicate);

struct ExperimentConfig
{
    std::vector<std::string> estimators = {"heat", "heat-app", "reheat", "sen"};
    int replicates = 2;
    std::vector<std::string> focus;            // populations to report; empty = all
    CVPlan cv;
    CVOptions cv_options;
    ElasticNetCVConfig elastic_net;
    int threads = 1;
};

struct ResultRow
{
    Index scenario = 0;
    SimScenario config;
    Index replicate = 0;
    std::string estimator;
    std::string population;
    std::string metric;
    double value = 0.0;
};

struct ExperimentResults
{
    std::vector<ResultRow> rows;
    std::vector<std::string> failures;
    std::map<std::string, double> seconds;     // total fit wall-clock per estimator
};

/// Every scenario x replicate cell: generate, fit each estimator (CV-tuned),
/// score rmse, rme, test_r2 and sigma_hat per focus population. Estimator
/// failures are recorded and the run continues.
ExperimentResults run_experiment(const std::vector<SimScenario>& grid, const ExperimentConfig& config);

/// Long format: scenario fields, replicate, estimator, population, metric, value.
void write_results(std::ostream& out, const std::vector<ResultRow>& rows);

struct SummaryRow
{
    Index scenario = 0;
    SimScenario config;
    std::string estimator;                     // "a/b" for paired ratios
    std::string population;
    std::string metric;
    double q1 = 0.0, median = 0.0, q3 = 0.0, mean = 0.0;
    Index count = 0;
};

/// Quartiles and average per (scenario, estimator, population, metric), plus
/// mean per-replicate ratios for heat/reheat, heat-app/heat and heat/sen.
std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows);
void write_summary(std::ostream& out, const std::vector<SummaryRow>& rows);

/// Linear-interpolation quantile (type 7).
double quantile(std::vector<double> values, double prob);

/// Two-sided Mann-Whitney U test, normal approximation with tie correction.
double mann_whitney_p(const std::vector<double>& a, const std::vector<double>& b);

struct SimulationFile
{
    std::vector<SimScenario> grid;
    std::map<std::string, std::string> extras;   // non-scenario keys (estimators, replicates, ...)
};

/// `key = value` lines; q, snr and sigma_ratio accept comma lists and expand
/// to their cartesian product.
SimulationFile read_simulation_config(const std::filesystem::path& path);
SimulationFile parse_simulation_config(std::istream& in, const std::string& source = "<config>");

} // namespace heat
