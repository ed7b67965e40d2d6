#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <unistd.h>

#include <heat/dataset.hpp>
#include <heat/solver.hpp>

#include "support.hpp"

using namespace heat;
namespace fs = std::filesystem;

namespace {

RawPopulation make_raw(const std::string& label, const std::vector<std::string>& names, const Matrix& X, const Vector& y)
{
    RawPopulation r;
    r.label = label;
    r.predictors = names;
    r.X = X;
    r.y = y;
    return r;
}

fs::path scratch_dir(const std::string& tag)
{
    auto dir = fs::temp_directory_path() / ("heat_dataset_" + tag + "_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    return dir;
}

void write_file(const fs::path& path, const std::string& text)
{
    std::ofstream(path) << text;
}

} // namespace

TEST_CASE("identical predictor sets give full masks")
{
    std::mt19937_64 rng(1);
    const Matrix X1 = testing_support::gaussian(6, 3, rng), X2 = testing_support::gaussian(5, 3, rng);
    const auto data = MultiPopDataset::from_raw({make_raw("A", {"a", "b", "c"}, X1, Vector::Random(6)),
                                                 make_raw("B", {"c", "a", "b"}, X2, Vector::Random(5))});
    CHECK(data.num_predictors() == 3);
    CHECK(data.availability().all());
}

TEST_CASE("union of predictor sets with zero padding")
{
    std::mt19937_64 rng(2);
    const auto data = MultiPopDataset::from_raw({make_raw("A", {"s1", "s2"}, testing_support::gaussian(5, 2, rng), Vector::Random(5)),
                                                 make_raw("B", {"s2", "s3"}, testing_support::gaussian(4, 2, rng), Vector::Random(4))});
    REQUIRE(data.num_predictors() == 3);
    CHECK(data.predictors() == std::vector<std::string>{"s1", "s2", "s3"});
    const Mask m = data.availability();
    CHECK(m(0, 0));
    CHECK(m(1, 0));
    CHECK_FALSE(m(2, 0));
    CHECK_FALSE(m(0, 1));
    CHECK(m(1, 1));
    CHECK(m(2, 1));
    CHECK(data.population(0).X.col(2).isZero(0.0));
    CHECK(data.population(1).X.col(0).isZero(0.0));
    for (const auto& b : data.populations()) CHECK(b.X.cols() == 3);
}

TEST_CASE("load order does not change the union indexing")
{
    std::mt19937_64 rng(3);
    const auto a = make_raw("A", {"z", "m"}, testing_support::gaussian(5, 2, rng), Vector::Random(5));
    const auto b = make_raw("B", {"b", "m"}, testing_support::gaussian(5, 2, rng), Vector::Random(5));
    CHECK(MultiPopDataset::from_raw({a, b}).predictors() == MultiPopDataset::from_raw({b, a}).predictors());
}

TEST_CASE("standardize examples")
{
    auto one_column = [](std::vector<double> v) {
        PopulationBlock b;
        b.label = "A";
        b.X = Eigen::Map<Vector>(v.data(), static_cast<Index>(v.size()));
        b.y = Vector::Zero(b.X.rows());
        b.available = {true};
        b.column_means = Vector::Zero(1);
        b.column_scales = Vector::Ones(1);
        return standardize(b, ScaleMode::unit_norm_bounded);
    };
    auto b = one_column({1, -1, 1, -1});
    CHECK(b.column_scales(0) == doctest::Approx(1.0));
    CHECK(b.X.col(0).squaredNorm() == doctest::Approx(4.0));

    b = one_column({2, 0, 0, 0});
    CHECK(b.column_scales(0) == doctest::Approx(1.0));
    CHECK(b.X(0, 0) == doctest::Approx(2.0));

    b = one_column({3, 0, 0, 0});
    CHECK(b.X(0, 0) == doctest::Approx(2.0));   // scaled by 2/3
    CHECK(b.X.col(0).squaredNorm() == doctest::Approx(4.0).epsilon(1e-14));

    b = one_column({5, 5, 5, 5});
    CHECK_FALSE(b.available[0]);
    CHECK(b.X.col(0).isZero(0.0));
}

TEST_CASE("column norms are bounded by n after loading")
{
    std::mt19937_64 rng(4);
    for (auto mode : {ScaleMode::unit_norm_bounded, ScaleMode::unit_variance}) {
        const auto raw = testing_support::random_raw({30, 20}, 5, {1.0, 2.0}, rng);
        const auto data = MultiPopDataset::from_raw(raw, {mode, ScaleScope::per_population});
        for (const auto& b : data.populations())
            for (Index k = 0; k < b.X.cols(); ++k) CHECK(b.X.col(k).squaredNorm() <= static_cast<double>(b.n()) * (1 + 1e-12));
    }
}

TEST_CASE("destandardizing reproduces the raw data")
{
    std::mt19937_64 rng(5);
    const auto raw = testing_support::random_raw({25, 18}, 6, {1.0, 3.0}, rng, {{}, {1, 4}});
    for (auto scope : {ScaleScope::per_population, ScaleScope::joint}) {
        const auto data = MultiPopDataset::from_raw(raw, {ScaleMode::unit_norm_bounded, scope});
        for (Index j = 0; j < 2; ++j) {
            const auto& b = data.population(j);
            const Matrix back = destandardize_design(b);
            const auto& r = raw[static_cast<size_t>(j)];
            for (Index c = 0; c < r.X.cols(); ++c) {
                const auto it = std::find(data.predictors().begin(), data.predictors().end(), r.predictors[static_cast<size_t>(c)]);
                const Index k = it - data.predictors().begin();
                CHECK((back.col(k) - r.X.col(c)).norm() <= 1e-12 * r.X.col(c).norm());
            }
            CHECK((destandardize_response(b) - r.y).norm() <= 1e-12 * r.y.norm());
        }
    }
}

TEST_CASE("joint scaling uses one divisor per predictor")
{
    std::mt19937_64 rng(6);
    const auto raw = testing_support::random_raw({20, 30}, 4, {1.0, 1.0}, rng);
    const auto data = MultiPopDataset::from_raw(raw, {ScaleMode::unit_norm_bounded, ScaleScope::joint});
    for (Index k = 0; k < 4; ++k) {
        CHECK(data.population(0).column_scales(k) == data.population(1).column_scales(k));
        const double total = data.population(0).X.col(k).squaredNorm() + data.population(1).X.col(k).squaredNorm();
        CHECK(total <= 50.0 * (1 + 1e-12));
    }
}

TEST_CASE("a constant available column behaves as if it were absent")
{
    std::mt19937_64 rng(7);
    auto raw = testing_support::random_raw({40, 35}, 3, {1.0, 1.5}, rng);
    auto with_constant = raw;
    with_constant[0].X.col(1).setConstant(2.0);
    auto dropped = raw;
    dropped[0].X = Matrix(raw[0].X.rows(), 2);
    dropped[0].X << raw[0].X.col(0), raw[0].X.col(2);
    dropped[0].predictors = {raw[0].predictors[0], raw[0].predictors[2]};
    dropped[0].y = with_constant[0].y;

    const auto a = MultiPopDataset::from_raw(with_constant);
    const auto b = MultiPopDataset::from_raw(dropped);
    CHECK_FALSE(a.availability()(1, 0));
    CHECK(a.availability() == b.availability());

    SolverConfig cfg;
    cfg.tol = 1e-12;
    cfg.kkt_tol = 1e-9;
    cfg.inner_kkt_tol = 1e-10;
    cfg.max_inner_iters = 5000;
    const auto fa = fit_heat(a, PenaltyParams::for_dataset(a, 0.05, 0.02), cfg);
    const auto fb = fit_heat(b, PenaltyParams::for_dataset(b, 0.05, 0.02), cfg);
    CHECK(testing_support::max_rel(fa.B_hat, fb.B_hat) < 1e-8);
    CHECK(testing_support::max_rel(fa.sigma_hat, fb.sigma_hat) < 1e-8);
    CHECK(fa.B_hat(1, 0) == 0.0);
}

TEST_CASE("raw data errors")
{
    std::mt19937_64 rng(8);
    const Matrix X = testing_support::gaussian(4, 2, rng);
    CHECK_THROWS_AS(MultiPopDataset::from_raw({make_raw("A", {"a", "a"}, X, Vector::Random(4))}), DataError);
    CHECK_THROWS_AS(MultiPopDataset::from_raw({make_raw("A", {"a", "b"}, Matrix(0, 2), Vector(0))}), DataError);
    CHECK_THROWS_AS(MultiPopDataset::from_raw({make_raw("A", {"a", "b"}, X, Vector::Random(3))}), DataError);
    CHECK_THROWS_AS(MultiPopDataset::from_raw({make_raw("A", {"a"}, X, Vector::Random(4))}), DataError);
    Matrix bad = X;
    bad(1, 1) = std::nan("");
    CHECK_THROWS_AS(MultiPopDataset::from_raw({make_raw("A", {"a", "b"}, bad, Vector::Random(4))}), DataError);
    CHECK_THROWS_AS(MultiPopDataset::from_raw({make_raw("A", {"a", "b"}, X, Vector::Random(4)),
                                               make_raw("A", {"a", "b"}, X, Vector::Random(4))}),
                    DataError);
}

TEST_CASE("file parsing and manifest")
{
    const auto dir = scratch_dir("files");
    write_file(dir / "a.csv", "response,s1,s2\n1.5,0,1\n2,1,2\n-1,2,0\n");
    write_file(dir / "b.tsv", "response\ts2\ts3\n1\t0\t1\n2\t1\t1e-1\n3\t2\t-2\n");
    write_file(dir / "m.txt", "# two populations\nAA = a.csv\nEA = b.tsv\n");
    const auto data = load_dataset(dir / "m.txt");
    CHECK(data.num_populations() == 2);
    CHECK(data.predictors() == std::vector<std::string>{"s1", "s2", "s3"});
    CHECK(data.population(1).label == "EA");
    CHECK(data.population(0).response_mean == doctest::Approx(2.5 / 3.0));

    auto message = [&](const std::string& file, const std::string& text) -> std::string {
        write_file(dir / file, text);
        try {
            (void)read_population_file(dir / file, "X");
        } catch (const DataError& e) {
            return e.what();
        }
        return "";
    };
    CHECK(message("c.csv", "response,s1\n1,2\n3,abc\n").find("c.csv:3") != std::string::npos);
    CHECK(message("d.csv", "response,s1\n1,2\n3\n").find("d.csv:3") != std::string::npos);
    CHECK(message("e.csv", "response,s1\n1,NA\n").find("e.csv:2") != std::string::npos);
    CHECK(message("f.csv", "y,s1\n1,2\n").find("f.csv:1") != std::string::npos);
    CHECK(message("g.csv", "response,s1\n").find("no rows") != std::string::npos);
    CHECK(message("h.csv", "response,s1,s1\n1,2,3\n").empty());   // caught when the dataset is built
    CHECK_THROWS_AS(load_dataset(std::vector<ManifestEntry>{{"A", dir / "h.csv"}}), DataError);

    write_file(dir / "bad_manifest.txt", "AA a.csv\n");
    try {
        (void)read_manifest(dir / "bad_manifest.txt");
        FAIL("expected an error");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("bad_manifest.txt:1") != std::string::npos);
    }
    const auto design = read_population_file(dir / "b.tsv", "EA", true);
    CHECK(design.X.cols() == 2);
    write_file(dir / "nor.csv", "s1,s2\n1,2\n");
    const auto no_response = read_population_file(dir / "nor.csv", "A", true);
    CHECK(no_response.y.size() == 0);
    CHECK(no_response.X.cols() == 2);
    fs::remove_all(dir);
}

TEST_CASE("subset keeps the predictor union and restandardizes")
{
    std::mt19937_64 rng(9);
    const auto data = MultiPopDataset::from_raw(testing_support::random_raw({20, 16}, 4, {1.0, 1.0}, rng, {{}, {3}}));
    const auto sub = data.subset({{0, 2, 4, 6, 8, 10}, {1, 3, 5, 7}});
    CHECK(sub.predictors() == data.predictors());
    CHECK(sub.population(0).n() == 6);
    CHECK(sub.population(1).n() == 4);
    CHECK(std::abs(sub.population(0).y.sum()) < 1e-12);
    CHECK_FALSE(sub.availability()(3, 1));
    const auto raw = data.to_raw();
    CHECK(raw[1].predictors.size() == 3);
}
