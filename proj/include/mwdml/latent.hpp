#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mwdml/lattice.hpp"
#include "mwdml/rng.hpp"

namespace mwdml {

/// Law of one latent factor U_{i.e}. Components are vector-valued; finite laws
/// list their atoms explicitly so conditional expectations can be enumerated.
class LatentDist
{
  public:
    enum class Kind
    {
        Normal,
        Uniform,
        Finite
    };

    static LatentDist normal(std::vector<double> mean, std::vector<double> sd);
    static LatentDist uniform(std::vector<double> lo, std::vector<double> hi);
    static LatentDist finite(std::vector<std::vector<double>> atoms, std::vector<double> probs);
    static LatentDist constant(std::vector<double> value);
    /// Independent components taking values +-scale[c] with probability 1/2 each.
    static LatentDist rademacher(const std::vector<double>& scale);
    /// Independent components, each uniform over `levels` equally spaced points in [-half_width, half_width].
    static LatentDist grid(const std::vector<double>& half_width, int levels);

    Kind kind() const { return kind_; }
    int width() const { return static_cast<int>(width_); }
    bool is_finite() const { return kind_ == Kind::Finite; }

    const std::vector<std::vector<double>>& atoms() const { return atoms_; }
    const std::vector<double>& probs() const { return probs_; }

    std::vector<double> mean() const;

    /// Draws one value into `out` (size width()). Returns the atom index for
    /// finite laws and -1 otherwise.
    int draw(CounterRng& rng, std::span<double> out) const;

  private:
    Kind kind_ = Kind::Finite;
    std::size_t width_ = 0;
    std::vector<double> a_, b_;  // normal: mean/sd, uniform: lo/hi
    std::vector<std::vector<double>> atoms_;
    std::vector<double> probs_;
    std::vector<double> cumulative_;
};

/// One stored value per nonzero mask e and per masked index i.e in I_{N,e}.
class LatentTable
{
  public:
    LatentTable() = default;
    LatentTable(Shape shape, const std::vector<int>& widths_by_mask);

    const Shape& shape() const { return shape_; }
    int width(Mask e) const { return blocks_[e.bits()].width; }
    std::size_t count(Mask e) const { return blocks_[e.bits()].count; }

    std::span<const double> value(Mask e, std::size_t masked_position) const;
    std::span<double> value(Mask e, std::size_t masked_position);
    std::span<const double> at(Mask e, const MultiIndex& cell) const;

    /// Atom index of a finite-law entry, -1 for continuous entries.
    int atom(Mask e, std::size_t masked_position) const { return blocks_[e.bits()].atoms[masked_position]; }
    void set_atom(Mask e, std::size_t masked_position, int atom) { blocks_[e.bits()].atoms[masked_position] = atom; }

    bool operator==(const LatentTable&) const = default;

  private:
    struct Block
    {
        int width = 0;
        std::size_t count = 0;
        std::vector<double> values;
        std::vector<int> atoms;
        bool operator==(const Block&) const = default;
    };

    Shape shape_;
    std::vector<Block> blocks_;  // indexed by mask bits, slot 0 unused
};

}  // namespace mwdml
