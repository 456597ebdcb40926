#include <doctest.h>

#include <cmath>

#include "mwdml/gmm.hpp"

using namespace mwdml;

namespace {

ClusteredSample rows_sample(Shape shape, const std::vector<std::vector<double>>& rows, std::vector<std::string> fields)
{
    ClusteredSample s(std::move(shape), std::move(fields));
    for (std::size_t c = 0; c < rows.size(); ++c)
        for (std::size_t j = 0; j < rows[c].size(); ++j)
            s.record(c)[j] = rows[c][j];
    return s;
}

Eigen::VectorXd vec1(double v)
{
    return Eigen::VectorXd::Constant(1, v);
}

EstimationSpec spec_from(double start, WeightingMode mode = WeightingMode::Identity)
{
    EstimationSpec spec;
    spec.theta_start = vec1(start);
    spec.weighting.mode = mode;
    return spec;
}

}  // namespace

TEST_SUITE("gmm")
{
    TEST_CASE("empirical moment of the location model")
    {
        const auto s = rows_sample(Shape({2, 2}), {{1.0}, {2.0}, {3.0}, {6.0}}, {"y"});
        const NuisanceParam none;
        CHECK(empirical_moment(LocationModel(0), s, vec1(3.0), none)(0) == 0.0);
        CHECK(empirical_moment(LocationModel(0), s, vec1(3.25), none)(0) == doctest::Approx(-0.25));
        const auto fit = solve_gmm(LocationModel(0), s, none, spec_from(0.0));
        CHECK(fit.converged);
        CHECK(fit.theta(0) == doctest::Approx(3.0));
    }

    TEST_CASE("just-identified IV solves the sample moment exactly")
    {
        const auto s = rows_sample(Shape({2}), {{2.0, 1.0, 1.0}, {4.0, 1.0, 2.0}}, {"y", "d", "z"});
        const NuisanceParam none;
        const auto fit = solve_gmm(IvModel(0, 1, {2}), s, none, spec_from(0.0));
        CHECK(fit.converged);
        CHECK(std::abs(fit.theta(0) - 10.0 / 3.0) <= 1e-12);
        CHECK(std::abs(fit.moment(0)) <= 1e-12);
    }

    TEST_CASE("weighting matrices")
    {
        const auto s = rows_sample(Shape({2}), {{2.0}, {-2.0}}, {"y"});
        const NuisanceParam none;
        WeightingSpec w;
        w.mode = WeightingMode::Identity;
        CHECK(weighting_matrix(LocationModel(0), s, vec1(0.0), none, w) == Eigen::MatrixXd::Identity(1, 1));
        // Scores +-2 with one dimension: Psi_hat = (2/4)(4 + 4) = 4.
        w.mode = WeightingMode::TwoStep;
        CHECK(weighting_matrix(LocationModel(0), s, vec1(0.0), none, w)(0, 0) == doctest::Approx(0.25));
        w.ridge = -1.0;
        CHECK_THROWS_AS(weighting_matrix(LocationModel(0), s, vec1(0.0), none, w), DomainError);

        const auto flat = rows_sample(Shape({2}), {{1.0}, {1.0}}, {"y"});
        w.ridge = 0.0;
        CHECK_THROWS_AS(weighting_matrix(LocationModel(0), flat, vec1(1.0), none, w), NumericalError);
    }

    TEST_CASE("noiseless partially linear sample recovers theta exactly")
    {
        // y = 2 d + x, l(x) = x, m = 0.
        std::vector<std::vector<double>> rows;
        const double ds[] = {0.5, -1.0, 2.0, 1.5, -0.3, 0.8, 1.1, -2.0, 0.4};
        for (int c = 0; c < 9; ++c)
        {
            const double x = 0.1 * c - 0.4;
            rows.push_back({2.0 * ds[c] + x, ds[c], x});
        }
        const auto s = rows_sample(Shape({3, 3}), rows, {"y", "d", "x1"});
        NuisanceParam eta;
        eta.set("l", [](Record r) { return r[2]; });
        eta.set("m", [](Record) { return 0.0; });
        const auto fit = solve_gmm(PlrModel(), s, eta, spec_from(-5.0));
        CHECK(fit.converged);
        CHECK(std::abs(fit.theta(0) - 2.0) <= 1e-12);
    }

    TEST_CASE("weighting does not matter when exactly identified")
    {
        std::vector<std::vector<double>> rows;
        for (int c = 0; c < 16; ++c)
        {
            const double z = std::sin(1.3 * c);
            const double d = z + 0.3 * std::cos(2.1 * c);
            rows.push_back({1.5 * d + 0.2 * std::sin(5.0 * c), d, z});
        }
        const auto s = rows_sample(Shape({4, 4}), rows, {"y", "d", "z"});
        const NuisanceParam none;
        const auto a = solve_gmm(IvModel(0, 1, {2}), s, none, spec_from(0.0));
        const auto b = solve_gmm(IvModel(0, 1, {2}), s, none, spec_from(0.0, WeightingMode::TwoStep));
        CHECK(std::abs(a.theta(0) - b.theta(0)) <= 1e-8);
        CHECK(b.theta_initial.size() == 1);
    }

    TEST_CASE("overidentified two-step solves its first-order condition")
    {
        std::vector<std::vector<double>> rows;
        for (int c = 0; c < 25; ++c)
        {
            const double z1 = std::sin(0.7 * c), z2 = std::cos(1.9 * c);
            const double d = z1 + 0.5 * z2 + 0.2 * std::sin(3.3 * c);
            rows.push_back({-d + 0.3 * std::cos(4.1 * c), d, z1, z2});
        }
        const auto s = rows_sample(Shape({5, 5}), rows, {"y", "d", "z1", "z2"});
        const NuisanceParam none;
        const auto fit = solve_gmm(IvModel(0, 1, {2, 3}), s, none, spec_from(0.0, WeightingMode::TwoStep));
        CHECK(fit.converged);
        CHECK(fit.foc_norm <= 1e-9);
        CHECK(fit.Upsilon.rows() == 2);
    }

    TEST_CASE("box constraints flag boundary solutions")
    {
        const auto s = rows_sample(Shape({2, 2}), {{1.0}, {2.0}, {3.0}, {6.0}}, {"y"});
        auto spec = spec_from(0.0);
        spec.upper = vec1(2.0);
        const auto fit = solve_gmm(LocationModel(0), s, NuisanceParam{}, spec);
        CHECK(fit.boundary);
        CHECK(fit.theta(0) == 2.0);

        spec.upper = vec1(10.0);
        CHECK_FALSE(solve_gmm(LocationModel(0), s, NuisanceParam{}, spec).boundary);
    }

    TEST_CASE("non-finite scores name the cells")
    {
        const auto s = rows_sample(Shape({3}), {{1.0}, {std::nan("")}, {2.0}}, {"y"});
        try
        {
            score_matrix(LocationModel(0), s, vec1(0.0), NuisanceParam{});
            FAIL("expected NonFiniteScore");
        }
        catch (const NonFiniteScore& e)
        {
            CHECK(e.cells() == std::vector<std::size_t>{1});
        }
        CHECK_THROWS_AS(solve_gmm(LocationModel(0), s, NuisanceParam{}, spec_from(0.0)), NumericalError);
    }

    TEST_CASE("dimension mismatches are rejected")
    {
        const auto s = rows_sample(Shape({2}), {{1.0}, {2.0}}, {"y"});
        EstimationSpec spec;
        spec.theta_start = Eigen::VectorXd::Zero(2);
        CHECK_THROWS_AS(solve_gmm(LocationModel(0), s, NuisanceParam{}, spec), DomainError);
    }
}
