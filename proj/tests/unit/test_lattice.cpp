#include <doctest.h>

#include <set>

#include "mwdml/error.hpp"
#include "mwdml/lattice.hpp"
#include "mwdml/rng.hpp"

using namespace mwdml;

TEST_SUITE("lattice")
{
    TEST_CASE("enumerate_cells lists the lattice in row-major order")
    {
        const auto cells = enumerate_cells(Shape({2, 2}));
        REQUIRE(cells.size() == 4);
        CHECK(cells[0].coords == std::vector<int>{1, 1});
        CHECK(cells[1].coords == std::vector<int>{1, 2});
        CHECK(cells[2].coords == std::vector<int>{2, 1});
        CHECK(cells[3].coords == std::vector<int>{2, 2});

        const auto line = enumerate_cells(Shape({3}));
        REQUIRE(line.size() == 3);
        for (int i = 0; i < 3; ++i)
            CHECK(line[static_cast<std::size_t>(i)].coords == std::vector<int>{i + 1});

        const auto thin = enumerate_cells(Shape({2, 1, 2}));
        REQUIRE(thin.size() == 4);
        for (const auto& c : thin)
            CHECK(c.coords[1] == 1);
    }

    TEST_CASE("shape summaries")
    {
        const Shape s({4, 7, 5});
        CHECK(s.order() == 3);
        CHECK(s.cells() == 140);
        CHECK(s.min_dim() == 4);
        CHECK(s.max_dim() == 7);
        CHECK(s.to_string() == "4x7x5");
        CHECK_THROWS_AS(Shape({3, 0}), DomainError);
    }

    TEST_CASE("masks parse, print and compare")
    {
        const Mask m = Mask::parse("101");
        CHECK(m.bits() == 5u);
        CHECK(m.weight() == 2);
        CHECK(m.to_string(3) == "101");
        CHECK(m.support(3) == std::vector<int>{0, 2});
        CHECK(Mask::parse("100").subset_of(m));
        CHECK_FALSE(Mask::parse("010").subset_of(m));
        CHECK_THROWS_AS(Mask::parse("12"), DomainError);
        CHECK(nonzero_masks(3).size() == 7);

        const auto by_weight = masks_by_weight(3);
        for (std::size_t i = 1; i < by_weight.size(); ++i)
            CHECK(by_weight[i - 1].weight() <= by_weight[i].weight());
    }

    TEST_CASE("linear positions round-trip")
    {
        const Shape s({3, 4, 2});
        for (std::size_t p = 0; p < s.cells(); ++p)
            CHECK(linear_index(s, from_linear(s, p)) == p);
    }

    TEST_CASE("masked positions enumerate I_{N,e}")
    {
        const Shape s({3, 4, 2});
        for (Mask e : nonzero_masks(3))
        {
            std::set<std::size_t> seen;
            for (const auto& c : enumerate_cells(s))
                seen.insert(masked_linear_index(s, e, c));
            CHECK(seen.size() == masked_count(s, e));
            for (std::size_t j = 0; j < masked_count(s, e); ++j)
                CHECK(masked_linear_index(s, e, masked_representative(s, e, j)) == j);
        }
        CHECK(masked_count(s, Mask::parse("101")) == 6);
    }

    TEST_CASE("keyed seeds are deterministic and order sensitive")
    {
        CHECK(derive_seed(1, {2, 3}) == derive_seed(1, {2, 3}));
        CHECK(derive_seed(1, {2, 3}) != derive_seed(1, {3, 2}));
        CHECK(derive_seed(1, {2, 3}) != derive_seed(2, {2, 3}));
        CounterRng a(42), b(42);
        for (int i = 0; i < 100; ++i)
        {
            const double u = a.uniform();
            CHECK(u == b.uniform());
            CHECK(u > 0.0);
            CHECK(u < 1.0);
        }
    }
}
