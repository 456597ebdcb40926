#include "mwdml/partition.hpp"

#include <algorithm>
#include <set>

#include "mwdml/error.hpp"

namespace mwdml {

TransversalPartition build_transversal_partition(const Shape& shape, Mask e)
{
    if (e.empty())
        throw DomainError("transversal partition needs a nonzero mask");
    if (!e.subset_of(Mask::full(shape.order())))
        throw DomainError("mask has bits beyond the shape's dimensions");

    auto dims = e.support(shape.order());
    std::stable_sort(dims.begin(), dims.end(), [&](int a, int b) { return shape.dim(a) > shape.dim(b); });
    const int last = dims.back();
    const int group_size = shape.dim(last);
    const std::vector<int> outer(dims.begin(), dims.end() - 1);

    std::size_t group_count = 1;
    for (int k : outer)
        group_count *= static_cast<std::size_t>(shape.dim(k));

    TransversalPartition out{shape, e, {}};
    out.groups.reserve(group_count);
    std::vector<int> g(outer.size(), 1);
    for (std::size_t gi = 0; gi < group_count; ++gi)
    {
        std::vector<MultiIndex> group;
        group.reserve(static_cast<std::size_t>(group_size));
        for (int t = 1; t <= group_size; ++t)
        {
            MultiIndex idx{std::vector<int>(static_cast<std::size_t>(shape.order()), 0)};
            for (std::size_t j = 0; j < outer.size(); ++j)
            {
                const int nj = shape.dim(outer[j]);
                idx.coords[static_cast<std::size_t>(outer[j])] = ((t + g[j] - 2) % nj) + 1;
            }
            idx.coords[static_cast<std::size_t>(last)] = t;
            group.push_back(std::move(idx));
        }
        out.groups.push_back(std::move(group));

        // Odometer over (g_1..g_{m-1}), last index fastest.
        for (std::size_t j = outer.size(); j-- > 0;)
        {
            if (++g[j] <= shape.dim(outer[j]))
                break;
            g[j] = 1;
        }
    }
    return out;
}

PartitionReport verify_partition(const TransversalPartition& p)
{
    PartitionReport report;
    const auto& shape = p.shape;
    const int order = shape.order();
    const auto support = p.mask.support(order);

    int expected_size = 0;
    if (!support.empty())
    {
        expected_size = shape.dim(support.front());
        for (int k : support)
            expected_size = std::min(expected_size, shape.dim(k));
    }

    report.group_size_ok = !p.groups.empty();
    report.transversal = true;
    std::set<MultiIndex> seen;
    std::size_t total = 0;
    bool in_lattice = true;
    for (const auto& group : p.groups)
    {
        if (static_cast<int>(group.size()) != expected_size)
            report.group_size_ok = false;
        for (std::size_t a = 0; a < group.size(); ++a)
        {
            const auto& idx = group[a];
            if (static_cast<int>(idx.coords.size()) != order)
            {
                in_lattice = false;
                continue;
            }
            for (int k = 0; k < order; ++k)
            {
                const int c = idx.coords[static_cast<std::size_t>(k)];
                if (p.mask.test(k) ? (c < 1 || c > shape.dim(k)) : c != 0)
                    in_lattice = false;
            }
            seen.insert(idx);
            ++total;
            for (std::size_t b = a + 1; b < group.size(); ++b)
                for (int k : support)
                    if (idx.coords[static_cast<std::size_t>(k)] == group[b].coords[static_cast<std::size_t>(k)])
                        report.transversal = false;
        }
    }
    report.disjoint = seen.size() == total;
    report.covers = in_lattice && !support.empty() && seen.size() == masked_count(shape, p.mask);
    return report;
}

void write_partition_csv(const TransversalPartition& p, std::ostream& out)
{
    out << "group_id";
    for (int k = 0; k < p.shape.order(); ++k)
        out << ",i_" << (k + 1);
    out << '\n';
    for (std::size_t g = 0; g < p.groups.size(); ++g)
        for (const auto& idx : p.groups[g])
        {
            out << (g + 1);
            for (int c : idx.coords)
                out << ',' << c;
            out << '\n';
        }
}

}  // namespace mwdml
