#include "mwdml/lattice.hpp"

#include <algorithm>

#include "mwdml/error.hpp"

namespace mwdml {

Shape::Shape(std::vector<int> dims) : dims_(std::move(dims))
{
    if (dims_.empty())
        throw DomainError("shape needs at least one dimension");
    if (dims_.size() > 16)
        throw DomainError("shape supports at most 16 dimensions");
    cells_ = 1;
    for (int d : dims_)
    {
        if (d < 1)
            throw DomainError("shape dimensions must be positive");
        cells_ *= static_cast<std::size_t>(d);
    }
    min_ = *std::min_element(dims_.begin(), dims_.end());
    max_ = *std::max_element(dims_.begin(), dims_.end());
}

std::string Shape::to_string() const
{
    std::string out;
    for (std::size_t k = 0; k < dims_.size(); ++k)
    {
        if (k)
            out += 'x';
        out += std::to_string(dims_[k]);
    }
    return out;
}

Mask Mask::parse(const std::string& text)
{
    if (text.empty() || text.size() > 16)
        throw DomainError("mask string must have 1..16 characters");
    std::uint32_t bits = 0;
    for (std::size_t k = 0; k < text.size(); ++k)
    {
        if (text[k] == '1')
            bits |= 1u << k;
        else if (text[k] != '0')
            throw DomainError("mask string may only contain 0 and 1: " + text);
    }
    return Mask(bits);
}

std::vector<int> Mask::support(int order) const
{
    std::vector<int> out;
    for (int k = 0; k < order; ++k)
        if (test(k))
            out.push_back(k);
    return out;
}

std::string Mask::to_string(int order) const
{
    std::string out(static_cast<std::size_t>(order), '0');
    for (int k = 0; k < order; ++k)
        if (test(k))
            out[static_cast<std::size_t>(k)] = '1';
    return out;
}

std::vector<Mask> nonzero_masks(int order)
{
    std::vector<Mask> out;
    for (std::uint32_t b = 1; b < (1u << order); ++b)
        out.emplace_back(b);
    return out;
}

std::vector<Mask> masks_by_weight(int order)
{
    auto out = nonzero_masks(order);
    std::stable_sort(out.begin(), out.end(), [](Mask a, Mask b) { return a.weight() < b.weight(); });
    return out;
}

MultiIndex MultiIndex::masked(Mask e) const
{
    MultiIndex out = *this;
    for (std::size_t k = 0; k < out.coords.size(); ++k)
        if (!e.test(static_cast<int>(k)))
            out.coords[k] = 0;
    return out;
}

std::vector<MultiIndex> enumerate_cells(const Shape& shape)
{
    std::vector<MultiIndex> out;
    out.reserve(shape.cells());
    for (std::size_t p = 0; p < shape.cells(); ++p)
        out.push_back(from_linear(shape, p));
    return out;
}

std::size_t linear_index(const Shape& shape, const MultiIndex& index)
{
    std::size_t pos = 0;
    for (int k = 0; k < shape.order(); ++k)
        pos = pos * static_cast<std::size_t>(shape.dim(k)) + static_cast<std::size_t>(index.coords[static_cast<std::size_t>(k)] - 1);
    return pos;
}

MultiIndex from_linear(const Shape& shape, std::size_t position)
{
    MultiIndex out{std::vector<int>(static_cast<std::size_t>(shape.order()))};
    for (int k = shape.order() - 1; k >= 0; --k)
    {
        auto d = static_cast<std::size_t>(shape.dim(k));
        out.coords[static_cast<std::size_t>(k)] = static_cast<int>(position % d) + 1;
        position /= d;
    }
    return out;
}

std::size_t masked_count(const Shape& shape, Mask e)
{
    std::size_t count = 1;
    for (int k = 0; k < shape.order(); ++k)
        if (e.test(k))
            count *= static_cast<std::size_t>(shape.dim(k));
    return count;
}

std::size_t masked_linear_index(const Shape& shape, Mask e, const MultiIndex& index)
{
    std::size_t pos = 0;
    for (int k = 0; k < shape.order(); ++k)
        if (e.test(k))
            pos = pos * static_cast<std::size_t>(shape.dim(k)) + static_cast<std::size_t>(index.coords[static_cast<std::size_t>(k)] - 1);
    return pos;
}

MultiIndex masked_representative(const Shape& shape, Mask e, std::size_t position)
{
    MultiIndex out{std::vector<int>(static_cast<std::size_t>(shape.order()), 1)};
    for (int k = shape.order() - 1; k >= 0; --k)
    {
        if (!e.test(k))
            continue;
        auto d = static_cast<std::size_t>(shape.dim(k));
        out.coords[static_cast<std::size_t>(k)] = static_cast<int>(position % d) + 1;
        position /= d;
    }
    return out;
}

}  // namespace mwdml
