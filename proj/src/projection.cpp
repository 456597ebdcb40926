#include "mwdml/projection.hpp"

#include <cmath>

#include "mwdml/error.hpp"

namespace mwdml {
namespace {

constexpr std::uint64_t kMeanStream = ~std::uint64_t{0};

/// Calls visit(atom_indices, weight) for every point of the joint support of
/// the given finite laws.
template <class Visit>
void for_each_joint_atom(const std::vector<const LatentDist*>& laws, Visit&& visit)
{
    double combos = 1.0;
    for (const auto* law : laws)
    {
        if (!law->is_finite())
            throw DomainError("exact projection requires finite latent support");
        combos *= static_cast<double>(law->atoms().size());
    }
    if (combos > 2.0e8)
        throw DomainError("joint latent support too large to enumerate");

    std::vector<int> idx(laws.size(), 0);
    while (true)
    {
        double w = 1.0;
        for (std::size_t j = 0; j < laws.size(); ++j)
            w *= laws[j]->probs()[static_cast<std::size_t>(idx[j])];
        visit(idx, w);
        std::size_t j = laws.size();
        while (j-- > 0)
        {
            if (++idx[j] < static_cast<int>(laws[j]->atoms().size()))
                break;
            idx[j] = 0;
        }
        if (j == static_cast<std::size_t>(-1))
            break;
    }
}

std::vector<Mask> nonzero_submasks(Mask e)
{
    std::vector<Mask> out;
    for (std::uint32_t s = e.bits(); s; s = (s - 1) & e.bits())
        out.emplace_back(s);
    return out;
}

double mobius_sign(Mask e, Mask sub)
{
    return ((e.weight() - sub.weight()) % 2) ? -1.0 : 1.0;
}

}  // namespace

ProjectionEngine::ProjectionEngine(const DgpSpec& spec, const LatentTable& table, std::vector<ScalarFn> functions,
                                   ProjectionOptions options)
    : spec_(spec), table_(table), functions_(std::move(functions)), options_(options)
{
    spec_.validate();
    if (!(table_.shape() == spec_.shape))
        throw DomainError("latent table shape does not match the DGP");
    if (options_.mode == ProjectionMode::MonteCarlo && options_.draws < 1)
        throw DomainError("Monte Carlo projection needs a positive draw budget");
    record_.assign(spec_.tau->fields().size(), 0.0);
}

ProjectionEngine::Fixed ProjectionEngine::fixed_from_table(const MultiIndex& cell, Mask e) const
{
    const auto slots = std::size_t{1} << spec_.shape.order();
    Fixed fixed{std::vector<std::span<const double>>(slots), std::vector<int>(slots, -2)};
    for (Mask s : nonzero_submasks(e))
    {
        const auto pos = masked_linear_index(spec_.shape, s, cell);
        fixed.values[s.bits()] = table_.value(s, pos);
        fixed.atoms[s.bits()] = table_.atom(s, pos);
    }
    return fixed;
}

std::vector<double> ProjectionEngine::expect(const Fixed& fixed, std::uint64_t stream)
{
    const auto slots = fixed.values.size();
    std::vector<Mask> free_masks;
    for (std::size_t b = 1; b < slots; ++b)
        if (fixed.values[b].empty())
            free_masks.emplace_back(static_cast<std::uint32_t>(b));

    LatentCell cell{fixed.values};
    std::vector<double> acc(functions_.size(), 0.0);
    auto evaluate = [&](double weight) {
        spec_.tau->compose(cell, record_);
        for (std::size_t f = 0; f < functions_.size(); ++f)
            acc[f] += weight * functions_[f](record_);
    };

    if (options_.mode == ProjectionMode::Exact)
    {
        std::vector<const LatentDist*> laws;
        for (Mask m : free_masks)
            laws.push_back(&spec_.law(m));
        for_each_joint_atom(laws, [&](const std::vector<int>& idx, double w) {
            for (std::size_t j = 0; j < free_masks.size(); ++j)
            {
                const auto& atom = laws[j]->atoms()[static_cast<std::size_t>(idx[j])];
                cell.factors[free_masks[j].bits()] = atom;
            }
            evaluate(w);
        });
        return acc;
    }

    std::vector<std::vector<double>> scratch(free_masks.size());
    for (std::size_t j = 0; j < free_masks.size(); ++j)
    {
        scratch[j].resize(static_cast<std::size_t>(spec_.law(free_masks[j]).width()));
        cell.factors[free_masks[j].bits()] = scratch[j];
    }
    const double w = 1.0 / options_.draws;
    for (int d = 0; d < options_.draws; ++d)
    {
        for (std::size_t j = 0; j < free_masks.size(); ++j)
        {
            CounterRng rng(derive_seed(options_.seed, {stream, static_cast<std::uint64_t>(d), free_masks[j].bits()}));
            spec_.law(free_masks[j]).draw(rng, scratch[j]);
        }
        evaluate(w);
    }
    return acc;
}

const std::vector<double>& ProjectionEngine::population_mean()
{
    if (!mean_ready_)
    {
        Fixed none{std::vector<std::span<const double>>(std::size_t{1} << spec_.shape.order()), {}};
        mean_ = expect(none, kMeanStream);
        mean_ready_ = true;
    }
    return mean_;
}

std::vector<double> ProjectionEngine::conditional_cached(const MultiIndex& cell, Mask e)
{
    if (e.empty())
        return population_mean();
    auto fixed = fixed_from_table(cell, e);

    const bool cacheable = options_.mode == ProjectionMode::Exact;
    std::vector<int> key;
    if (cacheable)
    {
        key.reserve(fixed.atoms.size());
        key.push_back(static_cast<int>(e.bits()));
        bool all_atoms = true;
        for (std::size_t b = 1; b < fixed.atoms.size(); ++b)
            if (Mask(static_cast<std::uint32_t>(b)).subset_of(e))
            {
                all_atoms = all_atoms && fixed.atoms[b] >= 0;
                key.push_back(fixed.atoms[b]);
            }
        if (all_atoms)
        {
            if (auto it = cache_.find(key); it != cache_.end())
                return it->second;
            auto value = expect(fixed, 0);
            cache_.emplace(std::move(key), value);
            return value;
        }
    }
    const std::uint64_t stream = derive_seed(linear_index(spec_.shape, cell), {e.bits()});
    return expect(fixed, stream);
}

std::vector<double> ProjectionEngine::conditional(const MultiIndex& cell, Mask e)
{
    return conditional_cached(cell, e);
}

std::vector<double> ProjectionEngine::pi_recursive(const MultiIndex& cell, Mask e)
{
    if (e.empty())
        throw DomainError("pi projection needs a nonzero mask");
    const auto& mean = population_mean();
    auto subs = nonzero_submasks(e);
    std::stable_sort(subs.begin(), subs.end(), [](Mask a, Mask b) { return a.weight() < b.weight(); });

    std::map<std::uint32_t, std::vector<double>> pi;
    for (Mask s : subs)
    {
        auto value = conditional_cached(cell, s);
        for (std::size_t f = 0; f < value.size(); ++f)
            value[f] -= mean[f];
        for (const auto& [bits, lower] : pi)
            if (Mask(bits).subset_of(s))
                for (std::size_t f = 0; f < value.size(); ++f)
                    value[f] -= lower[f];
        pi.emplace(s.bits(), std::move(value));
    }
    return pi.at(e.bits());
}

std::vector<double> ProjectionEngine::pi_mobius(const MultiIndex& cell, Mask e)
{
    if (e.empty())
        throw DomainError("pi projection needs a nonzero mask");
    const auto& mean = population_mean();
    std::vector<double> out(functions_.size(), 0.0);
    const double zero_sign = mobius_sign(e, Mask{});
    for (std::size_t f = 0; f < out.size(); ++f)
        out[f] = zero_sign * mean[f];
    for (Mask s : nonzero_submasks(e))
    {
        const auto value = conditional_cached(cell, s);
        const double sign = mobius_sign(e, s);
        for (std::size_t f = 0; f < out.size(); ++f)
            out[f] += sign * value[f];
    }
    return out;
}

std::vector<double> ProjectionEngine::component(Mask e)
{
    const auto count = masked_count(spec_.shape, e);
    std::vector<double> sum(functions_.size(), 0.0);
    for (std::size_t j = 0; j < count; ++j)
    {
        const auto pi = pi_mobius(masked_representative(spec_.shape, e, j), e);
        for (std::size_t f = 0; f < sum.size(); ++f)
            sum[f] += pi[f];
    }
    for (double& s : sum)
        s /= static_cast<double>(count);
    return sum;
}

std::vector<double> ProjectionEngine::pi_integrated_over(const MultiIndex& cell, Mask e, int l)
{
    if (options_.mode != ProjectionMode::Exact)
        throw DomainError("integrated projection check requires exact mode");
    if (!e.test(l))
        throw DomainError("dimension must lie in the support of the mask");
    const auto& mean = population_mean();

    std::vector<Mask> varied;
    std::vector<const LatentDist*> laws;
    for (Mask s : nonzero_submasks(e))
        if (s.test(l))
        {
            varied.push_back(s);
            laws.push_back(&spec_.law(s));
        }

    const auto base = fixed_from_table(cell, e);
    std::vector<double> acc(functions_.size(), 0.0);
    for_each_joint_atom(laws, [&](const std::vector<int>& idx, double w) {
        Fixed assignment = base;
        for (std::size_t j = 0; j < varied.size(); ++j)
        {
            assignment.values[varied[j].bits()] = laws[j]->atoms()[static_cast<std::size_t>(idx[j])];
            assignment.atoms[varied[j].bits()] = idx[j];
        }
        std::vector<double> pi(functions_.size(), 0.0);
        const double zero_sign = mobius_sign(e, Mask{});
        for (std::size_t f = 0; f < pi.size(); ++f)
            pi[f] = zero_sign * mean[f];
        for (Mask s : nonzero_submasks(e))
        {
            Fixed sub{std::vector<std::span<const double>>(assignment.values.size()), {}};
            for (Mask t : nonzero_submasks(s))
                sub.values[t.bits()] = assignment.values[t.bits()];
            const auto value = expect(sub, 0);
            const double sign = mobius_sign(e, s);
            for (std::size_t f = 0; f < pi.size(); ++f)
                pi[f] += sign * value[f];
        }
        for (std::size_t f = 0; f < acc.size(); ++f)
            acc[f] += w * pi[f];
    });
    return acc;
}

//---------------------------------------------------------------------------//

namespace {

const LatentTable& require_latent(const ClusteredSample& sample)
{
    if (!sample.latent())
        throw DomainError("projection requires a sample with its latent table attached");
    return *sample.latent();
}

}  // namespace

double conditional_projection(const ScalarFn& f, const DgpSpec& spec, const ClusteredSample& sample,
                              const MultiIndex& cell, Mask e, ProjectionOptions options)
{
    ProjectionEngine engine(spec, require_latent(sample), {f}, options);
    return engine.conditional(cell, e)[0];
}

PiProjection pi_projection(const ScalarFn& f, const DgpSpec& spec, const ClusteredSample& sample,
                           const MultiIndex& cell, Mask e, ProjectionOptions options)
{
    ProjectionEngine engine(spec, require_latent(sample), {f}, options);
    return {engine.pi_recursive(cell, e)[0], engine.pi_mobius(cell, e)[0]};
}

double HoeffdingComponents::total() const
{
    double s = 0.0;
    for (double v : values)
        s += v;
    return s;
}

HoeffdingComponents hoeffding_decompose(const ScalarFn& f, const DgpSpec& spec, const ClusteredSample& sample,
                                        ProjectionOptions options)
{
    ProjectionEngine engine(spec, require_latent(sample), {f}, options);
    HoeffdingComponents out;
    out.shape = spec.shape;
    for (Mask e : masks_by_weight(spec.shape.order()))
    {
        out.masks.push_back(e);
        out.values.push_back(engine.component(e)[0]);
        out.counts.push_back(masked_count(spec.shape, e));
    }
    double s = 0.0;
    for (std::size_t c = 0; c < sample.cells(); ++c)
        s += f(sample.record(c));
    out.sample_mean = s / static_cast<double>(sample.cells());
    out.population_mean = engine.population_mean()[0];
    return out;
}

HajekResult hajek_projection(const ScalarFn& f, const DgpSpec& spec, const ClusteredSample& sample,
                             ProjectionOptions options)
{
    const auto& table = require_latent(sample);
    ProjectionEngine engine(spec, table, {f}, options);
    const auto& shape = spec.shape;
    const double root_n = std::sqrt(static_cast<double>(shape.min_dim()));
    const double mean = engine.population_mean()[0];

    HajekResult out;
    for (int k = 0; k < shape.order(); ++k)
    {
        const Mask e = Mask::unit(k);
        double sum = 0.0;
        for (std::size_t j = 0; j < masked_count(shape, e); ++j)
            sum += engine.conditional(masked_representative(shape, e, j), e)[0] - mean;
        const double part = root_n / shape.dim(k) * sum;
        out.dimension_values.push_back(part);
        out.projection += part;
    }
    double s = 0.0;
    for (std::size_t c = 0; c < sample.cells(); ++c)
        s += f(sample.record(c));
    out.empirical_process = root_n * (s / static_cast<double>(sample.cells()) - mean);

    auto covs = dimension_covariances(spec, [&](Record x) { return Eigen::VectorXd::Constant(1, f(x)); }, options);
    for (const auto& c : covs)
        out.dimension_variance.push_back(c(0, 0));
    return out;
}

//---------------------------------------------------------------------------//

namespace {

std::vector<const LatentDist*> all_laws(const DgpSpec& spec)
{
    std::vector<const LatentDist*> laws;
    for (Mask e : nonzero_masks(spec.shape.order()))
        laws.push_back(&spec.law(e));
    return laws;
}

}  // namespace

Eigen::VectorXd population_expectation(const DgpSpec& spec, const VectorFn& g, ProjectionOptions options)
{
    spec.validate();
    const auto masks = nonzero_masks(spec.shape.order());
    const auto laws = all_laws(spec);
    std::vector<double> record(spec.tau->fields().size());
    LatentCell cell{std::vector<std::span<const double>>(std::size_t{1} << spec.shape.order())};
    Eigen::VectorXd acc;

    auto add = [&](double w) {
        spec.tau->compose(cell, record);
        Eigen::VectorXd v = g(record);
        if (acc.size() == 0)
            acc = Eigen::VectorXd::Zero(v.size());
        acc += w * v;
    };

    if (options.mode == ProjectionMode::Exact)
    {
        for_each_joint_atom(laws, [&](const std::vector<int>& idx, double w) {
            for (std::size_t j = 0; j < masks.size(); ++j)
                cell.factors[masks[j].bits()] = laws[j]->atoms()[static_cast<std::size_t>(idx[j])];
            add(w);
        });
        return acc;
    }
    if (options.draws < 1)
        throw DomainError("Monte Carlo expectation needs a positive draw budget");
    std::vector<std::vector<double>> scratch(masks.size());
    for (std::size_t j = 0; j < masks.size(); ++j)
    {
        scratch[j].resize(static_cast<std::size_t>(laws[j]->width()));
        cell.factors[masks[j].bits()] = scratch[j];
    }
    for (int d = 0; d < options.draws; ++d)
    {
        for (std::size_t j = 0; j < masks.size(); ++j)
        {
            CounterRng rng(derive_seed(options.seed, {static_cast<std::uint64_t>(d), masks[j].bits()}));
            laws[j]->draw(rng, scratch[j]);
        }
        add(1.0 / options.draws);
    }
    return acc;
}

std::vector<Eigen::MatrixXd> dimension_covariances(const DgpSpec& spec, const VectorFn& g, ProjectionOptions options)
{
    spec.validate();
    const int order = spec.shape.order();
    const auto masks = nonzero_masks(order);
    std::vector<double> record(spec.tau->fields().size());
    std::vector<Eigen::MatrixXd> out;

    for (int k = 0; k < order; ++k)
    {
        const Mask ek = Mask::unit(k);
        LatentCell cell{std::vector<std::span<const double>>(std::size_t{1} << order)};

        if (options.mode == ProjectionMode::Exact)
        {
            const auto& law = spec.law(ek);
            if (!law.is_finite())
                throw DomainError("exact projection requires finite latent support");
            std::vector<Mask> others;
            std::vector<const LatentDist*> laws;
            for (Mask m : masks)
                if (m != ek)
                {
                    others.push_back(m);
                    laws.push_back(&spec.law(m));
                }
            std::vector<Eigen::VectorXd> conditional;
            for (const auto& atom : law.atoms())
            {
                cell.factors[ek.bits()] = atom;
                Eigen::VectorXd acc;
                for_each_joint_atom(laws, [&](const std::vector<int>& idx, double w) {
                    for (std::size_t j = 0; j < others.size(); ++j)
                        cell.factors[others[j].bits()] = laws[j]->atoms()[static_cast<std::size_t>(idx[j])];
                    spec.tau->compose(cell, record);
                    Eigen::VectorXd v = g(record);
                    if (acc.size() == 0)
                        acc = Eigen::VectorXd::Zero(v.size());
                    acc += w * v;
                });
                conditional.push_back(std::move(acc));
            }
            Eigen::VectorXd mean = Eigen::VectorXd::Zero(conditional.front().size());
            for (std::size_t a = 0; a < conditional.size(); ++a)
                mean += law.probs()[a] * conditional[a];
            Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(mean.size(), mean.size());
            for (std::size_t a = 0; a < conditional.size(); ++a)
            {
                Eigen::VectorXd c = conditional[a] - mean;
                cov += law.probs()[a] * c * c.transpose();
            }
            out.push_back(std::move(cov));
            continue;
        }

        if (options.draws < 2)
            throw DomainError("Monte Carlo covariance needs at least two draws");
        std::vector<std::vector<double>> shared(1), first(masks.size()), second(masks.size());
        shared[0].resize(static_cast<std::size_t>(spec.law(ek).width()));
        for (std::size_t j = 0; j < masks.size(); ++j)
        {
            first[j].resize(static_cast<std::size_t>(spec.law(masks[j]).width()));
            second[j].resize(first[j].size());
        }
        Eigen::VectorXd sum;
        Eigen::MatrixXd cross;
        for (int d = 0; d < options.draws; ++d)
        {
            const auto dd = static_cast<std::uint64_t>(d);
            CounterRng shared_rng(derive_seed(options.seed, {static_cast<std::uint64_t>(k), dd, ek.bits()}));
            spec.law(ek).draw(shared_rng, shared[0]);
            for (std::size_t j = 0; j < masks.size(); ++j)
            {
                if (masks[j] == ek)
                    continue;
                CounterRng r1(derive_seed(options.seed, {static_cast<std::uint64_t>(k), dd, masks[j].bits(), 1}));
                CounterRng r2(derive_seed(options.seed, {static_cast<std::uint64_t>(k), dd, masks[j].bits(), 2}));
                spec.law(masks[j]).draw(r1, first[j]);
                spec.law(masks[j]).draw(r2, second[j]);
            }
            auto eval = [&](std::vector<std::vector<double>>& own) {
                for (std::size_t j = 0; j < masks.size(); ++j)
                    cell.factors[masks[j].bits()] = masks[j] == ek ? std::span<const double>(shared[0])
                                                                   : std::span<const double>(own[j]);
                spec.tau->compose(cell, record);
                return g(record);
            };
            Eigen::VectorXd a = eval(first);
            Eigen::VectorXd b = eval(second);
            if (sum.size() == 0)
            {
                sum = Eigen::VectorXd::Zero(a.size());
                cross = Eigen::MatrixXd::Zero(a.size(), a.size());
            }
            sum += a + b;
            cross += 0.5 * (a * b.transpose() + b * a.transpose());
        }
        const double m = options.draws;
        Eigen::VectorXd mean = sum / (2.0 * m);
        out.push_back(cross / m - mean * mean.transpose());
    }
    return out;
}

std::vector<double> projected_l2_norms(const DgpSpec& spec, const std::vector<ScalarFn>& functions, Mask e,
                                       ProjectionOptions options)
{
    spec.validate();
    if (e.empty())
        throw DomainError("projection norm needs a nonzero mask");
    std::vector<Mask> inner, outer;
    for (Mask m : nonzero_masks(spec.shape.order()))
        (m.subset_of(e) ? outer : inner).push_back(m);

    std::vector<double> record(spec.tau->fields().size());
    LatentCell cell{std::vector<std::span<const double>>(std::size_t{1} << spec.shape.order())};
    std::vector<double> squares(functions.size(), 0.0);
    std::vector<double> cond(functions.size());

    if (options.mode == ProjectionMode::Exact)
    {
        std::vector<const LatentDist*> outer_laws, inner_laws;
        for (Mask m : outer)
            outer_laws.push_back(&spec.law(m));
        for (Mask m : inner)
            inner_laws.push_back(&spec.law(m));
        for_each_joint_atom(outer_laws, [&](const std::vector<int>& oi, double ow) {
            for (std::size_t j = 0; j < outer.size(); ++j)
                cell.factors[outer[j].bits()] = outer_laws[j]->atoms()[static_cast<std::size_t>(oi[j])];
            std::fill(cond.begin(), cond.end(), 0.0);
            for_each_joint_atom(inner_laws, [&](const std::vector<int>& ii, double iw) {
                for (std::size_t j = 0; j < inner.size(); ++j)
                    cell.factors[inner[j].bits()] = inner_laws[j]->atoms()[static_cast<std::size_t>(ii[j])];
                spec.tau->compose(cell, record);
                for (std::size_t f = 0; f < functions.size(); ++f)
                    cond[f] += iw * functions[f](record);
            });
            for (std::size_t f = 0; f < functions.size(); ++f)
                squares[f] += ow * cond[f] * cond[f];
        });
    }
    else
    {
        if (options.draws < 1)
            throw DomainError("Monte Carlo projection needs a positive draw budget");
        std::vector<std::vector<double>> outer_vals(outer.size()), inner_vals(inner.size());
        for (std::size_t j = 0; j < outer.size(); ++j)
        {
            outer_vals[j].resize(static_cast<std::size_t>(spec.law(outer[j]).width()));
            cell.factors[outer[j].bits()] = outer_vals[j];
        }
        for (std::size_t j = 0; j < inner.size(); ++j)
        {
            inner_vals[j].resize(static_cast<std::size_t>(spec.law(inner[j]).width()));
            cell.factors[inner[j].bits()] = inner_vals[j];
        }
        for (int o = 0; o < options.draws; ++o)
        {
            const auto oo = static_cast<std::uint64_t>(o);
            for (std::size_t j = 0; j < outer.size(); ++j)
            {
                CounterRng rng(derive_seed(options.seed, {e.bits(), oo, outer[j].bits()}));
                spec.law(outer[j]).draw(rng, outer_vals[j]);
            }
            std::fill(cond.begin(), cond.end(), 0.0);
            for (int d = 0; d < options.draws; ++d)
            {
                for (std::size_t j = 0; j < inner.size(); ++j)
                {
                    CounterRng rng(derive_seed(options.seed,
                                               {e.bits(), oo, static_cast<std::uint64_t>(d), inner[j].bits()}));
                    spec.law(inner[j]).draw(rng, inner_vals[j]);
                }
                spec.tau->compose(cell, record);
                for (std::size_t f = 0; f < functions.size(); ++f)
                    cond[f] += functions[f](record) / options.draws;
            }
            for (std::size_t f = 0; f < functions.size(); ++f)
                squares[f] += cond[f] * cond[f] / options.draws;
        }
    }
    for (double& s : squares)
        s = std::sqrt(s);
    return squares;
}

}  // namespace mwdml
