#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "mwdml/partition.hpp"

using namespace mwdml;

namespace {

std::set<std::vector<int>> as_set(const std::vector<MultiIndex>& group)
{
    std::set<std::vector<int>> out;
    for (const auto& i : group)
        out.insert(i.coords);
    return out;
}

}  // namespace

TEST_SUITE("partition")
{
    TEST_CASE("one dimension gives a single group")
    {
        const auto p = build_transversal_partition(Shape({3}), Mask(1));
        REQUIRE(p.groups.size() == 1);
        CHECK(as_set(p.groups[0]) == std::set<std::vector<int>>{{1}, {2}, {3}});
    }

    TEST_CASE("2x2 full mask")
    {
        const auto p = build_transversal_partition(Shape({2, 2}), Mask(3));
        REQUIRE(p.groups.size() == 2);
        std::set<std::set<std::vector<int>>> groups;
        for (const auto& g : p.groups)
            groups.insert(as_set(g));
        CHECK(groups == std::set<std::set<std::vector<int>>>{{{1, 1}, {2, 2}}, {{2, 1}, {1, 2}}});
    }

    TEST_CASE("3x2 full mask matches the hand-applied shifts")
    {
        const auto p = build_transversal_partition(Shape({3, 2}), Mask(3));
        REQUIRE(p.groups.size() == 3);
        CHECK(as_set(p.groups[0]) == std::set<std::vector<int>>{{1, 1}, {2, 2}});
        CHECK(as_set(p.groups[1]) == std::set<std::vector<int>>{{2, 1}, {3, 2}});
        CHECK(as_set(p.groups[2]) == std::set<std::vector<int>>{{3, 1}, {1, 2}});
        CHECK(verify_partition(p).ok());
    }

    TEST_CASE("4x3x2 full mask passes every check")
    {
        const auto r = verify_partition(build_transversal_partition(Shape({4, 3, 2}), Mask(7)));
        CHECK(r.covers);
        CHECK(r.disjoint);
        CHECK(r.transversal);
        CHECK(r.group_size_ok);
    }

    TEST_CASE("masked-out coordinates are stored as zero")
    {
        const auto p = build_transversal_partition(Shape({3, 4, 2}), Mask::parse("101"));
        CHECK(verify_partition(p).ok());
        for (const auto& g : p.groups)
            for (const auto& i : g)
                CHECK(i.coords[1] == 0);
    }

    TEST_CASE("small shapes pass exhaustively")
    {
        for (int K = 1; K <= 3; ++K)
        {
            std::vector<int> dims(static_cast<std::size_t>(K), 1);
            while (true)
            {
                const Shape shape(dims);
                for (Mask e : nonzero_masks(K))
                    CHECK_MESSAGE(verify_partition(build_transversal_partition(shape, e)).ok(),
                                  shape.to_string() << " mask " << e.to_string(K));
                std::size_t k = 0;
                while (k < dims.size() && dims[k] == 4)
                    dims[k++] = 1;
                if (k == dims.size())
                    break;
                ++dims[k];
            }
        }
    }

    TEST_CASE("injected faults are detected")
    {
        auto p = build_transversal_partition(Shape({3, 3}), Mask(3));
        auto dup = p;
        dup.groups[0].push_back(dup.groups[1][0]);
        const auto r = verify_partition(dup);
        CHECK_FALSE(r.ok());
        CHECK((!r.covers || !r.disjoint));

        TransversalPartition shared{Shape({2, 2}), Mask(3), {{MultiIndex{{1, 1}}, MultiIndex{{1, 2}}},
                                                               {MultiIndex{{2, 1}}, MultiIndex{{2, 2}}}}};
        CHECK_FALSE(verify_partition(shared).transversal);
    }

    TEST_CASE("CSV lists group ids and coordinates")
    {
        std::ostringstream out;
        write_partition_csv(build_transversal_partition(Shape({2, 2}), Mask(3)), out);
        const std::string text = out.str();
        CHECK(text.rfind("group_id,i_1,i_2\n", 0) == 0);
        CHECK(std::count(text.begin(), text.end(), '\n') == 5);
    }
}
