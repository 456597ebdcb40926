#include "mwdml/latent.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "mwdml/error.hpp"

namespace mwdml {

LatentDist LatentDist::normal(std::vector<double> mean, std::vector<double> sd)
{
    if (mean.empty() || mean.size() != sd.size())
        throw DomainError("normal latent law needs matching non-empty mean and sd");
    for (double s : sd)
        if (!(s >= 0.0) || !std::isfinite(s))
            throw DomainError("normal latent law needs finite sd >= 0");
    LatentDist d;
    d.kind_ = Kind::Normal;
    d.width_ = mean.size();
    d.a_ = std::move(mean);
    d.b_ = std::move(sd);
    return d;
}

LatentDist LatentDist::uniform(std::vector<double> lo, std::vector<double> hi)
{
    if (lo.empty() || lo.size() != hi.size())
        throw DomainError("uniform latent law needs matching non-empty bounds");
    for (std::size_t c = 0; c < lo.size(); ++c)
        if (!(lo[c] <= hi[c]))
            throw DomainError("uniform latent law needs lo <= hi");
    LatentDist d;
    d.kind_ = Kind::Uniform;
    d.width_ = lo.size();
    d.a_ = std::move(lo);
    d.b_ = std::move(hi);
    return d;
}

LatentDist LatentDist::finite(std::vector<std::vector<double>> atoms, std::vector<double> probs)
{
    if (atoms.empty() || atoms.size() != probs.size())
        throw DomainError("finite latent law needs one probability per atom");
    const auto width = atoms.front().size();
    if (width == 0)
        throw DomainError("finite latent atoms must be non-empty");
    for (const auto& a : atoms)
        if (a.size() != width)
            throw DomainError("finite latent atoms must share one width");
    double total = 0.0;
    for (double p : probs)
    {
        if (!(p > 0.0))
            throw DomainError("finite latent probabilities must be positive");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-12)
        throw DomainError("finite latent probabilities must sum to 1");
    LatentDist d;
    d.kind_ = Kind::Finite;
    d.width_ = width;
    d.atoms_ = std::move(atoms);
    d.probs_ = std::move(probs);
    d.cumulative_.resize(d.probs_.size());
    std::partial_sum(d.probs_.begin(), d.probs_.end(), d.cumulative_.begin());
    d.cumulative_.back() = 1.0;
    return d;
}

LatentDist LatentDist::constant(std::vector<double> value)
{
    return finite({std::move(value)}, {1.0});
}

LatentDist LatentDist::rademacher(const std::vector<double>& scale)
{
    if (scale.empty() || scale.size() > 16)
        throw DomainError("rademacher latent law needs 1..16 components");
    const std::size_t count = std::size_t{1} << scale.size();
    std::vector<std::vector<double>> atoms;
    atoms.reserve(count);
    for (std::size_t m = 0; m < count; ++m)
    {
        std::vector<double> a(scale.size());
        for (std::size_t c = 0; c < scale.size(); ++c)
            a[c] = ((m >> c) & 1u) ? scale[c] : -scale[c];
        atoms.push_back(std::move(a));
    }
    return finite(std::move(atoms), std::vector<double>(count, 1.0 / static_cast<double>(count)));
}

LatentDist LatentDist::grid(const std::vector<double>& half_width, int levels)
{
    if (half_width.empty() || levels < 1)
        throw DomainError("grid latent law needs components and levels >= 1");
    double joint = std::pow(static_cast<double>(levels), static_cast<double>(half_width.size()));
    if (joint > 65536.0)
        throw DomainError("grid latent law support too large to enumerate");
    const auto count = static_cast<std::size_t>(joint);
    std::vector<std::vector<double>> atoms;
    atoms.reserve(count);
    for (std::size_t m = 0; m < count; ++m)
    {
        std::vector<double> a(half_width.size());
        std::size_t rest = m;
        for (std::size_t c = 0; c < half_width.size(); ++c)
        {
            auto level = static_cast<int>(rest % static_cast<std::size_t>(levels));
            rest /= static_cast<std::size_t>(levels);
            a[c] = levels == 1 ? 0.0 : half_width[c] * (2.0 * level / (levels - 1) - 1.0);
        }
        atoms.push_back(std::move(a));
    }
    return finite(std::move(atoms), std::vector<double>(count, 1.0 / static_cast<double>(count)));
}

std::vector<double> LatentDist::mean() const
{
    std::vector<double> m(width_, 0.0);
    switch (kind_)
    {
    case Kind::Normal:
        m = a_;
        break;
    case Kind::Uniform:
        for (std::size_t c = 0; c < width_; ++c)
            m[c] = 0.5 * (a_[c] + b_[c]);
        break;
    case Kind::Finite:
        for (std::size_t j = 0; j < atoms_.size(); ++j)
            for (std::size_t c = 0; c < width_; ++c)
                m[c] += probs_[j] * atoms_[j][c];
        break;
    }
    return m;
}

int LatentDist::draw(CounterRng& rng, std::span<double> out) const
{
    switch (kind_)
    {
    case Kind::Normal: {
        std::normal_distribution<double> z(0.0, 1.0);
        for (std::size_t c = 0; c < width_; ++c)
            out[c] = a_[c] + b_[c] * z(rng);
        return -1;
    }
    case Kind::Uniform:
        for (std::size_t c = 0; c < width_; ++c)
            out[c] = a_[c] + (b_[c] - a_[c]) * rng.uniform();
        return -1;
    case Kind::Finite: {
        std::size_t j = 0;
        if (atoms_.size() > 1)
        {
            const double u = rng.uniform();
            j = static_cast<std::size_t>(std::upper_bound(cumulative_.begin(), cumulative_.end(), u) - cumulative_.begin());
            j = std::min(j, atoms_.size() - 1);
        }
        std::copy(atoms_[j].begin(), atoms_[j].end(), out.begin());
        return static_cast<int>(j);
    }
    }
    return -1;
}

LatentTable::LatentTable(Shape shape, const std::vector<int>& widths_by_mask) : shape_(std::move(shape))
{
    const std::size_t slots = std::size_t{1} << shape_.order();
    if (widths_by_mask.size() != slots)
        throw DomainError("latent table needs one width per mask");
    blocks_.resize(slots);
    for (std::size_t b = 1; b < slots; ++b)
    {
        auto& block = blocks_[b];
        block.width = widths_by_mask[b];
        if (block.width < 1)
            throw DomainError("latent widths must be positive");
        block.count = masked_count(shape_, Mask(static_cast<std::uint32_t>(b)));
        block.values.assign(block.count * static_cast<std::size_t>(block.width), 0.0);
        block.atoms.assign(block.count, -1);
    }
}

std::span<const double> LatentTable::value(Mask e, std::size_t masked_position) const
{
    const auto& block = blocks_[e.bits()];
    const auto w = static_cast<std::size_t>(block.width);
    return {block.values.data() + masked_position * w, w};
}

std::span<double> LatentTable::value(Mask e, std::size_t masked_position)
{
    auto& block = blocks_[e.bits()];
    const auto w = static_cast<std::size_t>(block.width);
    return {block.values.data() + masked_position * w, w};
}

std::span<const double> LatentTable::at(Mask e, const MultiIndex& cell) const
{
    return value(e, masked_linear_index(shape_, e, cell));
}

}  // namespace mwdml
