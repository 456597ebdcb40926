#include "mwdml/dgp.hpp"

#include <algorithm>

#include "mwdml/csv.hpp"
#include "mwdml/error.hpp"

namespace mwdml {

const RecordFn& NuisanceParam::get(const std::string& name) const
{
    auto it = fns_.find(name);
    if (it == fns_.end())
        throw DomainError("nuisance parameter has no component '" + name + "'");
    return it->second;
}

std::vector<std::string> NuisanceParam::names() const
{
    std::vector<std::string> out;
    for (const auto& [name, fn] : fns_)
        out.push_back(name);
    return out;
}

NuisanceParam NuisanceParam::perturbed(const NuisanceParam& direction, double tau) const
{
    NuisanceParam out = *this;
    for (const auto& [name, dir] : direction.fns_)
    {
        auto base = get(name);
        out.fns_[name] = [base, dir, tau](Record x) { return base(x) + tau * dir(x); };
    }
    return out;
}

//---------------------------------------------------------------------------//

AdditiveComposer::AdditiveComposer(int order, double offset, std::vector<double> weights_by_mask)
    : offset_(offset), weights_(std::move(weights_by_mask))
{
    if (weights_.empty())
        weights_.assign(std::size_t{1} << order, 1.0);
    if (weights_.size() != (std::size_t{1} << order))
        throw DomainError("additive composer needs one weight per mask");
}

void AdditiveComposer::compose(const LatentCell& cell, std::span<double> record) const
{
    double y = offset_;
    for (std::size_t b = 1; b < weights_.size(); ++b)
        if (weights_[b] != 0.0)
            y += weights_[b] * cell.factors[b][0];
    record[0] = y;
}

ProductComposer::ProductComposer(std::vector<Mask> factors, std::vector<Mask> added)
    : factors_(std::move(factors)), added_(std::move(added))
{
    if (factors_.empty())
        throw DomainError("product composer needs at least one factor");
}

void ProductComposer::compose(const LatentCell& cell, std::span<double> record) const
{
    double y = 1.0;
    for (Mask e : factors_)
        y *= cell[e][0];
    for (Mask e : added_)
        y += cell[e][0];
    record[0] = y;
}

PlrComposer::PlrComposer(int order, double theta0, std::vector<double> gamma, std::vector<double> delta)
    : order_(order), theta0_(theta0), gamma_(std::move(gamma)), delta_(std::move(delta))
{
    if (gamma_.empty() || gamma_.size() != delta_.size())
        throw DomainError("plr composer needs gamma and delta of equal positive length");
    fields_ = {"y", "d"};
    for (std::size_t j = 0; j < gamma_.size(); ++j)
        fields_.push_back("x" + std::to_string(j + 1));
}

void PlrComposer::compose(const LatentCell& cell, std::span<double> record) const
{
    const std::size_t p = gamma_.size();
    double eps = 0.0, v = 0.0;
    for (std::size_t j = 0; j < p; ++j)
        record[2 + j] = 0.0;
    for (std::size_t b = 1; b < cell.factors.size(); ++b)
    {
        const auto u = cell.factors[b];
        for (std::size_t j = 0; j < p; ++j)
            record[2 + j] += u[j];
        eps += u[p];
        v += u[p + 1];
    }
    double mx = 0.0, gx = 0.0;
    for (std::size_t j = 0; j < p; ++j)
    {
        mx += gamma_[j] * record[2 + j];
        gx += delta_[j] * record[2 + j];
    }
    const double d = mx + v;
    record[1] = d;
    record[0] = theta0_ * d + gx + eps;
}

NuisanceParam PlrComposer::oracle_nuisance() const
{
    NuisanceParam eta;
    auto gamma = gamma_;
    std::vector<double> ell(gamma_.size());
    for (std::size_t j = 0; j < ell.size(); ++j)
        ell[j] = theta0_ * gamma_[j] + delta_[j];
    eta.set("m", [gamma](Record x) {
        double s = 0.0;
        for (std::size_t j = 0; j < gamma.size(); ++j)
            s += gamma[j] * x[2 + j];
        return s;
    });
    eta.set("l", [ell](Record x) {
        double s = 0.0;
        for (std::size_t j = 0; j < ell.size(); ++j)
            s += ell[j] * x[2 + j];
        return s;
    });
    // g0 = delta'x for the non-orthogonal control score.
    auto delta = delta_;
    eta.set("g", [delta](Record x) {
        double s = 0.0;
        for (std::size_t j = 0; j < delta.size(); ++j)
            s += delta[j] * x[2 + j];
        return s;
    });
    return eta;
}

IvComposer::IvComposer(int order, double theta0, double pi, double rho)
    : order_(order), theta0_(theta0), pi_(pi), rho_(rho)
{
}

void IvComposer::compose(const LatentCell& cell, std::span<double> record) const
{
    double z = 0.0, v = 0.0, u = 0.0;
    for (std::size_t b = 1; b < cell.factors.size(); ++b)
    {
        z += cell.factors[b][0];
        v += cell.factors[b][1];
        u += cell.factors[b][2];
    }
    const double d = pi_ * z + v;
    record[0] = theta0_ * d + u + rho_ * v;
    record[1] = d;
    record[2] = z;
}

//---------------------------------------------------------------------------//

DgpSpec DgpSpec::uniform_latent(Shape shape, const LatentDist& law, std::shared_ptr<const Composer> tau)
{
    DgpSpec spec;
    const std::size_t slots = std::size_t{1} << shape.order();
    spec.shape = std::move(shape);
    spec.latent.assign(slots, law);
    spec.tau = std::move(tau);
    return spec;
}

void DgpSpec::force_constant(Mask e)
{
    auto& law = latent.at(e.bits());
    law = LatentDist::constant(law.mean());
    if (std::find(degenerate.begin(), degenerate.end(), e) == degenerate.end())
        degenerate.push_back(e);
}

DgpSpec DgpSpec::reshaped(Shape other) const
{
    if (other.order() != shape.order())
        throw DomainError("reshaped DGP must keep the number of dimensions");
    DgpSpec out = *this;
    out.shape = std::move(other);
    return out;
}

bool DgpSpec::all_finite() const
{
    for (std::size_t b = 1; b < latent.size(); ++b)
        if (!latent[b].is_finite())
            return false;
    return true;
}

void DgpSpec::validate() const
{
    if (!tau)
        throw DomainError("DGP has no composition map");
    if (latent.size() != (std::size_t{1} << shape.order()))
        throw DomainError("DGP needs one latent law per mask");
    for (Mask e : nonzero_masks(shape.order()))
        if (law(e).width() < tau->required_width(e))
            throw DomainError("latent width for mask " + e.to_string(shape.order()) + " is smaller than tau requires");
}

//---------------------------------------------------------------------------//

ClusteredSample::ClusteredSample(Shape shape, std::vector<std::string> fields)
    : shape_(std::move(shape)), fields_(std::move(fields)), data_(shape_.cells() * fields_.size(), 0.0)
{
}

int ClusteredSample::field_index(const std::string& name) const
{
    auto it = std::find(fields_.begin(), fields_.end(), name);
    if (it == fields_.end())
        throw DomainError("sample has no field '" + name + "'");
    return static_cast<int>(it - fields_.begin());
}

std::vector<double> ClusteredSample::column(const std::string& name) const
{
    const auto j = static_cast<std::size_t>(field_index(name));
    std::vector<double> out(cells());
    for (std::size_t c = 0; c < cells(); ++c)
        out[c] = data_[c * width() + j];
    return out;
}

LatentTable generate_latent(const DgpSpec& spec, std::uint64_t seed)
{
    spec.validate();
    std::vector<int> widths(spec.latent.size(), 1);
    for (std::size_t b = 1; b < spec.latent.size(); ++b)
        widths[b] = spec.latent[b].width();
    LatentTable table(spec.shape, widths);
    for (Mask e : nonzero_masks(spec.shape.order()))
    {
        const auto& law = spec.law(e);
        for (std::size_t j = 0; j < table.count(e); ++j)
        {
            CounterRng rng(derive_seed(seed, {e.bits(), j}));
            table.set_atom(e, j, law.draw(rng, table.value(e, j)));
        }
    }
    return table;
}

LatentCell latent_cell(const LatentTable& table, const MultiIndex& cell)
{
    const auto& shape = table.shape();
    LatentCell out;
    out.factors.resize(std::size_t{1} << shape.order());
    for (Mask e : nonzero_masks(shape.order()))
        out.factors[e.bits()] = table.at(e, cell);
    return out;
}

ClusteredSample materialize(const LatentTable& table, const DgpSpec& spec)
{
    spec.validate();
    if (!(table.shape() == spec.shape))
        throw DomainError("latent table shape does not match the DGP");
    for (Mask e : nonzero_masks(spec.shape.order()))
        if (table.width(e) < spec.tau->required_width(e))
            throw DomainError("latent table is missing components for mask " + e.to_string(spec.shape.order()));
    ClusteredSample sample(spec.shape, spec.tau->fields());
    for (std::size_t c = 0; c < sample.cells(); ++c)
        spec.tau->compose(latent_cell(table, from_linear(spec.shape, c)), sample.record(c));
    sample.attach_latent(table);
    return sample;
}

ClusteredSample simulate(const DgpSpec& spec, std::uint64_t seed)
{
    return materialize(generate_latent(spec, seed), spec);
}

ClusteredSample permute(const ClusteredSample& sample, const std::vector<std::vector<int>>& perms)
{
    const auto& shape = sample.shape();
    if (perms.size() != static_cast<std::size_t>(shape.order()))
        throw DomainError("permute needs one permutation per dimension");
    for (int k = 0; k < shape.order(); ++k)
    {
        const auto& p = perms[static_cast<std::size_t>(k)];
        if (p.size() != static_cast<std::size_t>(shape.dim(k)))
            throw DomainError("permutation length does not match dimension " + std::to_string(k + 1));
        std::vector<bool> seen(p.size(), false);
        for (int v : p)
        {
            if (v < 1 || v > shape.dim(k) || seen[static_cast<std::size_t>(v - 1)])
                throw DomainError("invalid permutation for dimension " + std::to_string(k + 1));
            seen[static_cast<std::size_t>(v - 1)] = true;
        }
    }
    auto apply = [&](const MultiIndex& i) {
        MultiIndex out = i;
        for (std::size_t k = 0; k < out.coords.size(); ++k)
            if (out.coords[k] > 0)
                out.coords[k] = perms[k][static_cast<std::size_t>(out.coords[k] - 1)];
        return out;
    };

    ClusteredSample out(shape, sample.fields());
    for (std::size_t c = 0; c < sample.cells(); ++c)
    {
        const auto target = linear_index(shape, apply(from_linear(shape, c)));
        auto src = sample.record(c);
        std::copy(src.begin(), src.end(), out.record(target).begin());
    }
    if (const auto& table = sample.latent())
    {
        LatentTable moved = *table;
        for (Mask e : nonzero_masks(shape.order()))
            for (std::size_t j = 0; j < table->count(e); ++j)
            {
                const auto target = masked_linear_index(shape, e, apply(masked_representative(shape, e, j)));
                auto src = table->value(e, j);
                std::copy(src.begin(), src.end(), moved.value(e, target).begin());
                moved.set_atom(e, target, table->atom(e, j));
            }
        out.attach_latent(std::move(moved));
    }
    return out;
}

void write_sample_csv(const ClusteredSample& sample, std::ostream& out)
{
    const auto& shape = sample.shape();
    for (int k = 0; k < shape.order(); ++k)
        out << (k ? "," : "") << "i_" << (k + 1);
    for (const auto& f : sample.fields())
        out << ',' << f;
    out << '\n';
    for (std::size_t c = 0; c < sample.cells(); ++c)
    {
        const auto idx = from_linear(shape, c);
        for (std::size_t k = 0; k < idx.coords.size(); ++k)
            out << (k ? "," : "") << idx.coords[k];
        for (double v : sample.record(c))
            out << ',' << format_number(v);
        out << '\n';
    }
}

}  // namespace mwdml
