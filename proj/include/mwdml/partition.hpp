#pragma once

#include <ostream>
#include <vector>

#include "mwdml/lattice.hpp"

namespace mwdml {

/// Partition of I_{N,e} into groups whose members differ in every coordinate of supp(e).
struct TransversalPartition
{
    Shape shape;
    Mask mask;
    std::vector<std::vector<MultiIndex>> groups;
};

struct PartitionReport
{
    bool covers = false;
    bool disjoint = false;
    bool transversal = false;
    bool group_size_ok = false;

    bool ok() const { return covers && disjoint && transversal && group_size_ok; }
};

/// Cyclic-shift construction: with supp(e) sorted by non-increasing size and the
/// smallest dimension last, group (g_1..g_{m-1}) holds
///   (((t + g_1 - 2) mod N_1) + 1, ..., ((t + g_{m-1} - 2) mod N_{m-1}) + 1, t),  t in [N_m].
/// Coordinates outside supp(e) are stored as 0.
TransversalPartition build_transversal_partition(const Shape& shape, Mask e);

/// Exhaustive check of cover, disjointness, transversality, and group size.
PartitionReport verify_partition(const TransversalPartition& partition);

/// CSV rows (group_id, i_1..i_K), group ids 1-based.
void write_partition_csv(const TransversalPartition& partition, std::ostream& out);

}  // namespace mwdml
