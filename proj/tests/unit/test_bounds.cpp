#include <doctest.h>

#include <cmath>
#include <sstream>

#include "fixtures.hpp"
#include "mwdml/bounds.hpp"
#include "mwdml/error.hpp"

using namespace mwdml;

TEST_SUITE("bounds")
{
    TEST_CASE("entropy integral oracles")
    {
        const double e = std::exp(1.0);
        CHECK(entropy_integral_vc(e, 1.0, 1, 0.0) == 0.0);
        // int_0^1 sqrt(2 - log t) dt, evaluated to 30 digits beforehand.
        CHECK(std::abs(entropy_integral_vc(e, 1.0, 1, 1.0) - 1.7121666017860276) <= 1e-12);
        // k = 2 has the closed form 1 + v (1 + log A) = 3 at A = e, v = 1.
        CHECK(entropy_integral_vc(e, 1.0, 2, 1.0) == doctest::Approx(3.0).epsilon(1e-12));
        CHECK(entropy_integral_vc(e, 1.0, 1, 0.5) < entropy_integral_vc(e, 1.0, 1, 1.0));
        CHECK_THROWS_AS(entropy_integral_vc(2.0, 1.0, 1, 1.0), DomainError);
        CHECK_THROWS_AS(entropy_integral_vc(e, 0.5, 1, 1.0), DomainError);
    }

    TEST_CASE("VC thresholds in both forms")
    {
        const double e = std::exp(1.0);
        const auto k1 = vc_thresholds(1);
        CHECK(k1.exponent_form == doctest::Approx(e));
        CHECK(k1.quotient_form == doctest::Approx(e));
        const auto k3 = vc_thresholds(3);
        CHECK(k3.exponent_form == doctest::Approx(e));  // e^{1/4} < e
        CHECK(k3.quotient_form == doctest::Approx(std::exp(4.0) / 16.0));
        CHECK(k3.weaker() == doctest::Approx(e));
    }

    TEST_CASE("threshold grid and centering")
    {
        const auto spec = fixtures::additive_pm1(Shape({2, 2}));
        const auto grid = threshold_grid(0, {-1.5, 0.0, 1.5});
        CHECK(grid.size() == 3);
        const double x = 0.5;
        const Record r(&x, 1);
        CHECK(grid.functions[0](r) == 0.0);
        CHECK(grid.functions[2](r) == 1.0);
        CHECK(grid.envelope_excess(r) <= 0.0);

        const auto centered = center_grid(grid, spec);
        CHECK(centered.centered);
        // y is a sum of three +-1 factors: P(y <= 0) = 1/2.
        CHECK(centered.means[1] == doctest::Approx(0.5));
        CHECK(centered.functions[1](r) == doctest::Approx(-0.5));
        CHECK(centered.envelope_excess(r) <= 0.0);
    }

    TEST_CASE("zero function gives a zero sup")
    {
        const auto spec = fixtures::additive_pm1(Shape({3, 3}));
        auto grid = center_grid(singleton_grid([](Record) { return 0.0; }, [](Record) { return 1.0; }), spec);
        const auto est = empirical_sup_process(grid, spec, Mask(1), 100, 1);
        CHECK(est.mean == 0.0);
        CHECK(est.se == 0.0);
    }

    TEST_CASE("one-way component of a singleton grid reduces to an iid mean")
    {
        // H^{10} is the mean of four +-1 row factors, so 2 |H| = |S_4| / 2 with E|S_4| = 3/2.
        const auto spec = fixtures::additive_pm1(Shape({4, 4}));
        auto grid = center_grid(singleton_grid([](Record x) { return x[0]; }, [](Record) { return 3.0; }), spec);
        const auto est = empirical_sup_process(grid, spec, Mask(1), 4000, 21);
        CHECK(std::abs(est.mean - 0.75) <= 4.0 * est.se);
    }

    TEST_CASE("sup simulation requires centering and enough replications")
    {
        const auto spec = fixtures::additive_pm1(Shape({3, 3}));
        const auto raw = threshold_grid(0, {0.0});
        CHECK_THROWS_AS(empirical_sup_process(raw, spec, Mask(1), 100, 1), DomainError);
        CHECK_THROWS_AS(empirical_sup_process(center_grid(raw, spec), spec, Mask(1), 10, 1), DomainError);
    }

    TEST_CASE("bound check validates its inputs")
    {
        const auto spec = fixtures::additive_pm1(Shape({3, 3}));
        auto grid = center_grid(threshold_grid(0, {0.0}), spec);
        BoundOptions opt;
        opt.n_grid = {2, 3};
        opt.replications = 100;
        opt.diagonal_draws = 10;
        CHECK_THROWS_AS(bound_check(grid, spec, {Mask(1)}, opt), DomainError);  // no (A, v)
        grid.vc_A = 2.0;
        grid.vc_v = 1.0;
        CHECK_THROWS_AS(bound_check(grid, spec, {Mask(1)}, opt), DomainError);  // A < e
    }

    TEST_CASE("degenerate interaction gives a zero left side")
    {
        auto spec = fixtures::additive_pm1(Shape({2, 2}));
        spec.force_constant(Mask(3));
        auto grid = center_grid(singleton_grid([](Record x) { return x[0]; }, [](Record) { return 2.0; }), spec);
        grid.vc_A = std::exp(1.0);
        grid.vc_v = 1.0;
        BoundOptions opt;
        opt.n_grid = {2, 4};
        opt.replications = 100;
        opt.diagonal_draws = 20;
        const auto report = bound_check(grid, spec, {Mask(3)}, opt);
        for (const auto& p : report.points)
            CHECK(p.lhs <= 1e-8);
        REQUIRE(report.trends.size() == 1);
        CHECK(report.trends[0].degenerate);
        CHECK(report.ok());

        std::ostringstream out;
        write_bound_csv(report, out);
        CHECK(out.str().rfind("mask,n,lhs,lhs_se,rhs_global,rhs_local,ratio\n11,2,", 0) == 0);
    }

    TEST_CASE("local bound pieces for a one-way mask")
    {
        const auto spec = fixtures::additive_pm1(Shape({2, 2}));
        auto grid = center_grid(singleton_grid([](Record x) { return x[0]; }, [](Record) { return 3.0; }), spec);
        grid.vc_A = std::exp(1.0);
        grid.vc_v = 1.0;
        BoundOptions opt;
        opt.n_grid = {4};
        opt.replications = 200;
        opt.diagonal_draws = 50;
        const auto report = bound_check(grid, spec, {Mask(1)}, opt);
        REQUIRE(report.points.size() == 1);
        const auto& p = report.points[0];
        CHECK(p.sigma == doctest::Approx(1.0));  // ||P_10 f|| = ||u10|| = 1
        CHECK(p.projected_envelope == doctest::Approx(3.0));
        CHECK(p.diagonal_max == doctest::Approx(3.0));
        CHECK(report.envelope_norm == doctest::Approx(3.0));
        CHECK(p.rhs_local == doctest::Approx(std::sqrt(std::log(4.0)) + 1.5 * std::log(4.0)));
        CHECK(p.ratio == doctest::Approx(p.lhs / p.rhs_local));
    }
}
