#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "mwdml/error.hpp"
#include "mwdml/projection.hpp"

using namespace mwdml;

namespace {

const ScalarFn identity = [](Record x) { return x[0]; };

double factor(const ClusteredSample& s, Mask e, const MultiIndex& cell)
{
    return s.latent()->at(e, cell)[0];
}

}  // namespace

TEST_SUITE("projection")
{
    TEST_CASE("conditioning on every factor returns f itself")
    {
        const auto spec = fixtures::additive_pm1(Shape({3, 3}));
        const auto s = simulate(spec, 1);
        const auto square = [](Record x) { return x[0] * x[0]; };
        for (const auto& cell : enumerate_cells(spec.shape))
            CHECK(conditional_projection(square, spec, s, cell, Mask(3)) ==
                  doctest::Approx(square(s.record(linear_index(spec.shape, cell)))));
    }

    TEST_CASE("additive map: row projection is the row factor")
    {
        const auto spec = fixtures::additive_pm1(Shape({4, 4}));
        const auto s = simulate(spec, 2);
        for (const auto& cell : enumerate_cells(spec.shape))
        {
            CHECK(conditional_projection(identity, spec, s, cell, Mask(1)) ==
                  doctest::Approx(factor(s, Mask(1), cell)));
            // Interaction present: pi_{11} picks it up.
            const auto pi = pi_projection(identity, spec, s, cell, Mask(3));
            CHECK(pi.recursive == doctest::Approx(factor(s, Mask(3), cell)));
            CHECK(pi.mobius == doctest::Approx(factor(s, Mask(3), cell)));
        }
    }

    TEST_CASE("additive map without interaction has zero pi_{11}")
    {
        auto spec = fixtures::additive_pm1(Shape({3, 3}));
        spec.force_constant(Mask(3));
        const auto s = simulate(spec, 3);
        for (const auto& cell : enumerate_cells(spec.shape))
            CHECK(pi_projection(identity, spec, s, cell, Mask(3)).recursive == doctest::Approx(0.0));
    }

    TEST_CASE("product map: one-way projections vanish, interaction is X")
    {
        const auto spec = fixtures::product_pm1(Shape({4, 4}));
        const auto s = simulate(spec, 4);
        for (const auto& cell : enumerate_cells(spec.shape))
        {
            CHECK(conditional_projection(identity, spec, s, cell, Mask(1)) == 0.0);
            const auto pi = pi_projection(identity, spec, s, cell, Mask(3));
            CHECK(pi.recursive == doctest::Approx(s.record(linear_index(spec.shape, cell))[0]));
        }
    }

    TEST_CASE("constant functions have zero pi for every nonzero mask")
    {
        const auto spec = fixtures::additive_pm1(Shape({2, 3}));
        const auto s = simulate(spec, 5);
        const ScalarFn c = [](Record) { return 2.5; };
        for (const auto& cell : enumerate_cells(spec.shape))
            for (Mask e : nonzero_masks(2))
                CHECK(pi_projection(c, spec, s, cell, e).recursive == doctest::Approx(0.0).scale(1.0));
    }

    TEST_CASE("Hoeffding components of the additive map are factor means")
    {
        const auto spec = fixtures::additive_pm1(Shape({4, 4}));
        const auto s = simulate(spec, 6);
        const auto h = hoeffding_decompose(identity, spec, s);
        REQUIRE(h.masks.size() == 3);
        const auto& t = *s.latent();
        for (std::size_t m = 0; m < 3; ++m)
        {
            double mean = 0.0;
            for (std::size_t j = 0; j < t.count(h.masks[m]); ++j)
                mean += t.value(h.masks[m], j)[0];
            mean /= static_cast<double>(t.count(h.masks[m]));
            CHECK(h.values[m] == doctest::Approx(mean));
        }
        CHECK(std::abs(h.reconstruction_error()) <= 1e-12);
        CHECK(h.counts == std::vector<std::size_t>{4, 4, 16});
    }

    TEST_CASE("Hoeffding components of the product map")
    {
        const auto spec = fixtures::product_pm1(Shape({4, 4}));
        const auto s = simulate(spec, 7);
        const auto h = hoeffding_decompose(identity, spec, s);
        CHECK(h.values[0] == doctest::Approx(0.0));
        CHECK(h.values[1] == doctest::Approx(0.0));
        CHECK(h.values[2] == doctest::Approx(h.sample_mean));
        CHECK(h.population_mean == 0.0);
    }

    TEST_CASE("zero function decomposes to zeros")
    {
        const auto spec = fixtures::additive_pm1(Shape({2, 2, 2}));
        const auto s = simulate(spec, 8);
        const auto h = hoeffding_decompose([](Record) { return 0.0; }, spec, s);
        for (double v : h.values)
            CHECK(v == 0.0);
    }

    TEST_CASE("recursion and inclusion-exclusion agree")
    {
        const auto spec = fixtures::additive_pm1(Shape({3, 2, 2}));
        const auto s = simulate(spec, 9);
        const ScalarFn f = [](Record x) { return std::exp(0.3 * x[0]) + (x[0] > 0.5 ? 1.0 : 0.0); };
        for (const auto& cell : enumerate_cells(spec.shape))
            for (Mask e : nonzero_masks(3))
            {
                const auto pi = pi_projection(f, spec, s, cell, e);
                CHECK(std::abs(pi.recursive - pi.mobius) <= 1e-12);
            }
    }

    TEST_CASE("pi integrates to zero over any one of its dimensions")
    {
        const auto spec = fixtures::additive_pm1(Shape({2, 2, 2}));
        const auto s = simulate(spec, 10);
        const ScalarFn f = [](Record x) { return x[0] * x[0] * x[0] - x[0] * x[0]; };
        ProjectionEngine engine(spec, *s.latent(), {f});
        for (const auto& cell : enumerate_cells(spec.shape))
            for (Mask e : nonzero_masks(3))
                for (int l : e.support(3))
                    CHECK(std::abs(engine.pi_integrated_over(cell, e, l)[0]) <= 1e-12);
    }

    TEST_CASE("Hajek projection: dimension variances equal factor variances")
    {
        const auto spec = fixtures::additive_pm1(Shape({5, 5}));
        const auto s = simulate(spec, 11);
        const auto h = hajek_projection(identity, spec, s);
        REQUIRE(h.dimension_variance.size() == 2);
        CHECK(h.dimension_variance[0] == doctest::Approx(1.0));
        CHECK(h.dimension_variance[1] == doctest::Approx(1.0));
        CHECK(hajek_projection([](Record) { return 3.0; }, spec, s).projection == doctest::Approx(0.0));
    }

    TEST_CASE("exact mode refuses continuous factors")
    {
        auto spec = fixtures::additive_pm1(Shape({2, 2}));
        spec.latent[2] = LatentDist::normal({0.0}, {1.0});  // integrated out below
        const auto s = simulate(spec, 12);
        CHECK_THROWS_AS(conditional_projection(identity, spec, s, MultiIndex{{1, 1}}, Mask(1)), DomainError);
    }

    TEST_CASE("Monte Carlo projection approaches the exact value")
    {
        const auto spec = fixtures::product_pm1(Shape({3, 3}));
        const auto s = simulate(spec, 13);
        const ScalarFn f = [](Record x) { return x[0] > 0 ? 1.0 : 0.0; };
        const auto exact = conditional_projection(f, spec, s, MultiIndex{{1, 1}}, Mask(1));
        const auto mc = conditional_projection(f, spec, s, MultiIndex{{1, 1}}, Mask(1),
                                               {ProjectionMode::MonteCarlo, 40000, 1});
        CHECK(exact == doctest::Approx(0.5));
        CHECK(std::abs(mc - exact) <= 4.0 * 0.5 / std::sqrt(40000.0));
    }

    TEST_CASE("population expectation and covariances by enumeration")
    {
        const auto spec = fixtures::additive_pm1(Shape({2, 2}));
        const VectorFn g = [](Record x) {
            Eigen::VectorXd v(2);
            v << x[0], x[0] * x[0];
            return v;
        };
        const auto mean = population_expectation(spec, g, {});
        CHECK(mean(0) == doctest::Approx(0.0));
        CHECK(mean(1) == doctest::Approx(3.0));
        const auto covs = dimension_covariances(spec, g, {});
        REQUIRE(covs.size() == 2);
        // E[y | u10] = u10 and E[y^2 | u10] = 2 + 1 constant in the sign of u10.
        CHECK(covs[0](0, 0) == doctest::Approx(1.0));
        CHECK(covs[0](1, 1) == doctest::Approx(0.0).scale(1.0));
        const auto norms = projected_l2_norms(spec, {[](Record x) { return x[0]; }}, Mask(1), {});
        CHECK(norms[0] == doctest::Approx(1.0));
    }
}
