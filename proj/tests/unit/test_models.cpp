#include <doctest.h>

#include <cmath>
#include <limits>

#include "fixtures.hpp"
#include "mwdml/error.hpp"
#include "mwdml/models.hpp"

using namespace mwdml;

namespace {

Eigen::VectorXd vec1(double v)
{
    return Eigen::VectorXd::Constant(1, v);
}

ClusteredSample column_sample(const std::vector<std::vector<double>>& rows, std::vector<std::string> fields)
{
    ClusteredSample s(Shape({static_cast<int>(rows.size())}), std::move(fields));
    for (std::size_t c = 0; c < rows.size(); ++c)
        for (std::size_t j = 0; j < rows[c].size(); ++j)
            s.record(c)[j] = rows[c][j];
    return s;
}

}  // namespace

TEST_SUITE("models")
{
    TEST_CASE("scores at hand-picked points")
    {
        const NuisanceParam none;
        const double x = 3.0;
        CHECK(evaluate_score(LocationModel(0), Record(&x, 1), vec1(1.0), none)(0) == 2.0);

        const double iv[] = {2.0, 1.0, 1.0};
        CHECK(evaluate_score(IvModel(0, 1, {2}), Record(iv, 3), vec1(2.0), none)(0) == 0.0);

        // Noise-free cell at the truth: y = theta d + l-part, d = m.
        const auto spec = fixtures::plr_pm1(Shape({2, 2}), {1.0}, {0.5});
        const auto eta = spec.tau->oracle_nuisance();
        const double rec[] = {1.0 * 2.0 + 0.5 * 2.0, 2.0, 2.0};
        CHECK(evaluate_score(PlrModel(), Record(rec, 3), vec1(1.0), eta)(0) == 0.0);
    }

    TEST_CASE("Jacobians match hand differentiation")
    {
        const NuisanceParam none;
        const auto loc = column_sample({{1.0}, {5.0}}, {"y"});
        CHECK(score_jacobian(LocationModel(0), loc, vec1(0.3), none)(0, 0) == 1.0);

        const auto ivs = column_sample({{2.0, 1.0, 1.0}, {4.0, 3.0, 2.0}}, {"y", "d", "z"});
        CHECK(score_jacobian(IvModel(0, 1, {2}), ivs, vec1(0.0), none)(0, 0) == doctest::Approx(3.5));

        const auto spec = fixtures::plr_pm1(Shape({3, 3}), {1.0, -0.5}, {0.5, 0.0});
        const auto s = simulate(spec, 3);
        const auto eta = spec.tau->oracle_nuisance();
        double expected = 0.0;
        for (std::size_t c = 0; c < s.cells(); ++c)
        {
            const double r = s.record(c)[1] - eta("m", s.record(c));
            expected += r * r / static_cast<double>(s.cells());
        }
        CHECK(score_jacobian(PlrModel(), s, vec1(0.7), eta)(0, 0) == doctest::Approx(expected));
        CHECK(score_jacobian(PlrModel(), s, vec1(0.7), eta, JacobianMethod::FiniteDifference)(0, 0) ==
              doctest::Approx(expected).epsilon(1e-8));
    }

    TEST_CASE("finite differences refuse a non-finite parameter")
    {
        const NuisanceParam none;
        const double x = 1.0;
        CHECK_THROWS_AS(score_derivative(LocationModel(0), Record(&x, 1), vec1(std::numeric_limits<double>::infinity()), none,
                                         JacobianMethod::FiniteDifference),
                        NumericalError);
    }

    TEST_CASE("orthogonal score has zero Gateaux derivative; control does not")
    {
        const auto spec = fixtures::plr_pm1(Shape({2, 2}), {0.5, 0.25}, {1.0, -0.5});
        const auto eta = spec.tau->oracle_nuisance();
        const std::vector<double> steps{0.1, 0.05, 0.025};

        NuisanceParam dl, dm, zero;
        dl.set("l", [](Record x) { return x[2] * x[3]; });
        dm.set("m", [](Record x) { return std::sin(x[2]); });
        zero.set("l", [](Record) { return 0.0; });
        zero.set("m", [](Record) { return 0.0; });
        const auto report = orthogonality_check(PlrModel(), spec, vec1(1.0), eta,
                                                {normalize_direction(dl, spec), normalize_direction(dm, spec), zero},
                                                steps);
        CHECK(report.max_abs <= 1e-6);
        CHECK(report.derivatives[2] == 0.0);

        // Control: derivative along x1 / ||x1|| is -gamma_1 Var(x1) / sqrt(Var x1) = -0.5 sqrt(3).
        NuisanceParam dg;
        dg.set("g", [](Record x) { return x[2]; });
        const auto control = orthogonality_check(NonOrthogonalPlrModel(), spec, vec1(1.0), eta,
                                                 {normalize_direction(dg, spec)}, steps);
        CHECK(control.derivatives[0] == doctest::Approx(-0.5 * std::sqrt(3.0)));
        CHECK_THROWS_AS(orthogonality_check(PlrModel(), spec, vec1(1.0), eta, {dl}, {0.1, 0.2}), DomainError);
    }

    TEST_CASE("sandwich oracles")
    {
        OracleVariance o;
        o.J0 = Eigen::MatrixXd::Constant(1, 1, 1.0);
        o.Upsilon = Eigen::MatrixXd::Constant(1, 1, 1.0);
        o.Psi0 = Eigen::MatrixXd::Constant(1, 1, 3.0);
        CHECK(oracle_V(o)(0, 0) == doctest::Approx(3.0));
        o.J0(0, 0) = 2.0;
        o.Psi0(0, 0) = 4.0;
        CHECK(oracle_V(o)(0, 0) == doctest::Approx(1.0));
        o.Upsilon(0, 0) = 7.5;
        CHECK(oracle_V(o)(0, 0) == doctest::Approx(1.0));
        o.J0(0, 0) = 0.0;
        CHECK_THROWS_AS(oracle_V(o), NumericalError);
    }

    TEST_CASE("oracle middle matrix by enumeration")
    {
        const auto spec = fixtures::additive_pm1(Shape({2, 4}));
        const auto o = oracle_psi0(LocationModel(0), spec, vec1(0.0), {});
        REQUIRE(o.dimension_terms.size() == 2);
        CHECK(o.dimension_terms[0](0, 0) == doctest::Approx(1.0));
        CHECK(o.dimension_terms[1](0, 0) == doctest::Approx(1.0));
        CHECK(o.mu == std::vector<double>{1.0, 0.5});
        CHECK(o.Psi0(0, 0) == doctest::Approx(1.5));
        CHECK(o.J0(0, 0) == doctest::Approx(1.0));
        CHECK(o.V(0, 0) == doctest::Approx(1.5));
        CHECK_FALSE(o.degenerate);
    }

    TEST_CASE("symmetric square DGP has equal dimension terms")
    {
        const auto spec = fixtures::plr_pm1(Shape({3, 3}), {0.5}, {1.0});
        const auto o = oracle_psi0(PlrModel(), spec, vec1(1.0), spec.tau->oracle_nuisance());
        CHECK(o.dimension_terms[0](0, 0) == doctest::Approx(o.dimension_terms[1](0, 0)));
        // E[psi | U_10] = eps_10 v_10 (+ zero-mean terms), variance 1.
        CHECK(o.dimension_terms[0](0, 0) == doctest::Approx(1.0));
    }

    TEST_CASE("iid-degenerate DGP is flagged")
    {
        auto spec = fixtures::plr_pm1(Shape({3, 3}), {0.5}, {1.0});
        spec.force_constant(Mask(1));
        spec.force_constant(Mask(2));
        const auto o = oracle_psi0(PlrModel(), spec, vec1(1.0), spec.tau->oracle_nuisance());
        CHECK(o.degenerate);
        CHECK(o.Psi0.norm() <= 1e-12);

        auto normal = fixtures::plr_normal(Shape({3, 3}), {0.5}, {1.0});
        normal.force_constant(Mask(1));
        normal.force_constant(Mask(2));
        const auto mc = oracle_psi0(PlrModel(), normal, vec1(1.0), normal.tau->oracle_nuisance(),
                                    {ProjectionMode::MonteCarlo, 20000, 4});
        CHECK(mc.degenerate);
    }

    TEST_CASE("nuisance distance is a pooled RMS")
    {
        const auto s = column_sample({{1.0}, {2.0}}, {"x"});
        NuisanceParam a, b;
        a.set("l", [](Record x) { return x[0]; });
        b.set("l", [](Record x) { return x[0] + 3.0; });
        CHECK(nuisance_distance(a, b, s, {"l"}) == doctest::Approx(3.0));
    }
}
