#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace mwdml {

/// Index lattice [N_1] x ... x [N_K].
class Shape
{
  public:
    Shape() = default;
    explicit Shape(std::vector<int> dims);

    int order() const { return static_cast<int>(dims_.size()); }
    int dim(int k) const { return dims_[static_cast<std::size_t>(k)]; }
    const std::vector<int>& dims() const { return dims_; }

    /// Total number of cells N.
    std::size_t cells() const { return cells_; }
    /// Smallest dimension n.
    int min_dim() const { return min_; }
    /// Largest dimension N-bar.
    int max_dim() const { return max_; }

    std::string to_string() const;
    bool operator==(const Shape&) const = default;

  private:
    std::vector<int> dims_;
    std::size_t cells_ = 0;
    int min_ = 0;
    int max_ = 0;
};

/// A 0/1 vector over the K dimensions, stored as a bitset (bit k <-> dimension k).
class Mask
{
  public:
    constexpr Mask() = default;
    constexpr explicit Mask(std::uint32_t bits) : bits_(bits) {}

    static Mask full(int order) { return Mask((1u << order) - 1u); }
    static Mask unit(int k) { return Mask(1u << k); }
    /// Parses "101" style strings; character k is dimension k.
    static Mask parse(const std::string& text);

    constexpr std::uint32_t bits() const { return bits_; }
    constexpr bool test(int k) const { return (bits_ >> k) & 1u; }
    constexpr bool empty() const { return bits_ == 0; }
    int weight() const { return std::popcount(bits_); }

    /// Componentwise e' <= e.
    constexpr bool subset_of(Mask other) const { return (bits_ & ~other.bits_) == 0; }
    constexpr Mask without(int k) const { return Mask(bits_ & ~(1u << k)); }

    std::vector<int> support(int order) const;
    std::string to_string(int order) const;

    constexpr bool operator==(const Mask&) const = default;

  private:
    std::uint32_t bits_ = 0;
};

/// All nonzero masks over K dimensions in increasing bit order.
std::vector<Mask> nonzero_masks(int order);
/// Nonzero masks sorted by weight, then bit order (the order a recursion needs).
std::vector<Mask> masks_by_weight(int order);

/// Multi-index with 1-based coordinates; masked-out coordinates are stored as 0.
struct MultiIndex
{
    std::vector<int> coords;

    MultiIndex masked(Mask e) const;
    bool operator==(const MultiIndex&) const = default;
    auto operator<=>(const MultiIndex&) const = default;
};

/// All cells of the lattice in row-major coordinate order (last coordinate fastest).
std::vector<MultiIndex> enumerate_cells(const Shape& shape);

/// Row-major position of a full index within the lattice.
std::size_t linear_index(const Shape& shape, const MultiIndex& index);
MultiIndex from_linear(const Shape& shape, std::size_t position);

/// |I_{N,e}| = prod over supp(e) of N_k.
std::size_t masked_count(const Shape& shape, Mask e);
/// Row-major position of i (.) e among I_{N,e}; coordinates outside supp(e) are ignored.
std::size_t masked_linear_index(const Shape& shape, Mask e, const MultiIndex& index);
/// Representative full cell for the j-th element of I_{N,e}; masked-out coordinates set to 1.
MultiIndex masked_representative(const Shape& shape, Mask e, std::size_t position);

}  // namespace mwdml
