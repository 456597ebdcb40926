#include "mwdml/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "mwdml/csv.hpp"
#include "mwdml/error.hpp"
#include "mwdml/parallel.hpp"

namespace mwdml {
namespace {

const double kE = std::exp(1.0);

bool at_least(double value, double floor)
{
    return value >= floor * (1.0 - 1e-12);
}

struct Slope
{
    double value = 0.0;
    double se = 0.0;
};

/// OLS slope of y on x with standard error from known per-point variances.
Slope ols_slope(const std::vector<double>& x, const std::vector<double>& y, const std::vector<double>& var)
{
    const auto m = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
    {
        mx += x[i] / m;
        my += y[i] / m;
    }
    double sxx = 0.0, sxy = 0.0, v = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
    {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx <= 0.0)
        return {};
    for (std::size_t i = 0; i < x.size(); ++i)
        v += (x[i] - mx) * (x[i] - mx) * var[i];
    return {sxy / sxx, std::sqrt(v) / sxx};
}

double median(std::vector<double> v)
{
    std::sort(v.begin(), v.end());
    const auto m = v.size();
    return m % 2 ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
}

}  // namespace

double FunctionGrid::envelope_excess(Record x) const
{
    const double bound = envelope(x);
    double worst = -bound;
    for (const auto& f : functions)
        worst = std::max(worst, std::abs(f(x)) - bound);
    return worst;
}

FunctionGrid threshold_grid(int field, const std::vector<double>& thresholds)
{
    if (field < 0)
        throw DomainError("threshold grid needs a valid field index");
    FunctionGrid grid;
    for (double t : thresholds)
    {
        grid.functions.push_back([field, t](Record x) { return x[static_cast<std::size_t>(field)] <= t ? 1.0 : 0.0; });
        grid.labels.push_back("le_" + format_number(t));
    }
    grid.envelope = [](Record) { return 1.0; };
    return grid;
}

FunctionGrid singleton_grid(ScalarFn f, ScalarFn envelope, std::string label)
{
    FunctionGrid grid;
    grid.functions.push_back(std::move(f));
    grid.envelope = std::move(envelope);
    grid.labels.push_back(std::move(label));
    return grid;
}

FunctionGrid center_grid(const FunctionGrid& grid, const DgpSpec& spec, ProjectionOptions options)
{
    if (grid.functions.empty() || !grid.envelope)
        throw DomainError("function grid needs members and an envelope");
    const auto fns = grid.functions;
    const Eigen::VectorXd means = population_expectation(
        spec,
        [&fns](Record x) {
            Eigen::VectorXd v(static_cast<Eigen::Index>(fns.size()));
            for (std::size_t j = 0; j < fns.size(); ++j)
                v(static_cast<Eigen::Index>(j)) = fns[j](x);
            return v;
        },
        options);

    FunctionGrid out = grid;
    out.functions.clear();
    out.means.assign(means.data(), means.data() + means.size());
    double shift = 0.0;
    for (std::size_t j = 0; j < fns.size(); ++j)
    {
        const double m = out.means[j];
        shift = std::max(shift, std::abs(m));
        out.functions.push_back([f = fns[j], m](Record x) { return f(x) - m; });
    }
    out.envelope = [F = grid.envelope, shift](Record x) { return F(x) + shift; };
    out.centered = true;
    return out;
}

double entropy_integral_vc(double A, double v, int k, double delta)
{
    if (!at_least(A, kE))
        throw DomainError("VC characteristic A must be at least e");
    if (!(v >= 1.0))
        throw DomainError("VC characteristic v must be at least 1");
    if (k < 1)
        throw DomainError("interaction order k must be at least 1");
    if (!(delta >= 0.0 && delta <= 1.0))
        throw DomainError("delta must lie in [0, 1]");
    if (delta == 0.0)
        return 0.0;
    const double half_k = 0.5 * k;
    auto integrand = [=](double tau) { return std::pow(1.0 + v * std::log(A / tau), half_k); };
    boost::math::quadrature::tanh_sinh<double> integrator;
    double error = 0.0;
    const double value = integrator.integrate(integrand, 0.0, delta, 1e-12, &error);
    if (!std::isfinite(value) || error > 1e-8 * std::abs(value))
        throw NumericalError("entropy integral quadrature did not reach the requested accuracy");
    return value;
}

VcThresholds vc_thresholds(int order)
{
    if (order < 1)
        throw DomainError("order must be at least 1");
    const double km1 = order - 1;
    return {std::max(std::exp(2.0 * km1 / 16.0), kE), std::max(std::exp(2.0 * km1) / 16.0, kE)};
}

SupEstimate empirical_sup_process(const FunctionGrid& grid, const DgpSpec& spec, Mask e, int replications,
                                  std::uint64_t seed, ProjectionOptions options, int threads)
{
    if (!grid.centered)
        throw DomainError("sup-process simulation needs a centered grid");
    if (replications < 100)
        throw DomainError("sup-process simulation needs at least 100 replications");
    if (e.empty() || !e.subset_of(Mask::full(spec.shape.order())))
        throw DomainError("mask must be nonzero and fit the shape");
    spec.validate();

    const double scale = std::sqrt(static_cast<double>(masked_count(spec.shape, e)));
    SupEstimate out;
    out.draws.assign(static_cast<std::size_t>(replications), 0.0);
    parallel_for(out.draws.size(), threads, [&](std::size_t r) {
        const auto rep_seed = derive_seed(seed, {e.bits(), r});
        const auto table = generate_latent(spec, rep_seed);
        ProjectionOptions local = options;
        local.seed = derive_seed(rep_seed, {1});
        ProjectionEngine engine(spec, table, grid.functions, local);
        double sup = 0.0;
        for (double h : engine.component(e))
            sup = std::max(sup, std::abs(h));
        out.draws[r] = scale * sup;
    });

    const double R = replications;
    for (double d : out.draws)
        out.mean += d / R;
    double ss = 0.0;
    for (double d : out.draws)
        ss += (d - out.mean) * (d - out.mean);
    out.se = std::sqrt(ss / (R - 1.0) / R);
    return out;
}

bool BoundReport::ok() const
{
    for (const auto& t : trends)
        if (!t.ok())
            return false;
    return !trends.empty();
}

BoundReport bound_check(const FunctionGrid& grid, const DgpSpec& spec, const std::vector<Mask>& masks,
                        const BoundOptions& options)
{
    if (!grid.vc_A || !grid.vc_v)
        throw DomainError("bound check needs declared VC characteristics (A, v)");
    if (!grid.centered)
        throw DomainError("bound check needs a centered grid");
    if (options.n_grid.empty() || masks.empty())
        throw DomainError("bound check needs masks and an n grid");
    if (!(options.q >= 1.0))
        throw DomainError("moment order q must be at least 1");
    if (options.diagonal_draws < 1)
        throw DomainError("diagonal maximum needs at least one draw");

    const int order = spec.shape.order();
    BoundReport report;
    report.order = order;
    report.A = *grid.vc_A;
    report.v = *grid.vc_v;
    report.q = options.q;
    report.thresholds = vc_thresholds(order);
    if (!at_least(report.A, report.thresholds.weaker()))
        throw DomainError("VC characteristic A is below both VC thresholds");
    if (!(report.v >= 1.0))
        throw DomainError("VC characteristic v must be at least 1");

    const double qq = std::max(options.q, 2.0);
    const auto F = grid.envelope;
    report.envelope_norm = std::pow(
        population_expectation(
            spec, [&](Record x) { return Eigen::VectorXd::Constant(1, std::pow(std::abs(F(x)), qq)); },
            options.projection)(0),
        1.0 / qq);

    for (Mask e : masks)
    {
        if (e.empty() || !e.subset_of(Mask::full(order)))
            throw DomainError("mask must be nonzero and fit the shape");
        const int k = e.weight();
        const auto norms = projected_l2_norms(spec, grid.functions, e, options.projection);
        const double pe_f = projected_l2_norms(spec, {F}, e, options.projection)[0];
        const double tiny = 1e-12 * std::max(pe_f, 1e-300);
        const double sigma = std::clamp(*std::max_element(norms.begin(), norms.end()), tiny, std::max(pe_f, tiny));
        const double j_one = entropy_integral_vc(report.A, report.v, k, 1.0);

        for (int n : options.n_grid)
        {
            if (n < 1)
                throw DomainError("n grid entries must be positive");
            const auto spec_n = spec.reshaped(Shape(std::vector<int>(static_cast<std::size_t>(order), n)));
            const auto point_seed = derive_seed(options.seed, {e.bits(), static_cast<std::uint64_t>(n)});
            const auto sup = empirical_sup_process(grid, spec_n, e, options.replications, point_seed,
                                                   options.projection, options.threads);

            std::vector<double> diag(static_cast<std::size_t>(options.diagonal_draws));
            parallel_for(diag.size(), options.threads, [&](std::size_t d) {
                const auto table = generate_latent(spec_n, derive_seed(point_seed, {d, 0x4D}));
                ProjectionOptions local = options.projection;
                local.seed = derive_seed(point_seed, {d, 0x4E});
                ProjectionEngine engine(spec_n, table, {F}, local);
                double m = -std::numeric_limits<double>::infinity();
                for (int t = 1; t <= n; ++t)
                {
                    MultiIndex cell{std::vector<int>(static_cast<std::size_t>(order), t)};
                    m = std::max(m, engine.conditional(cell, e)[0]);
                }
                diag[d] = m * m;
            });
            double m2 = 0.0;
            for (double d : diag)
                m2 += d / static_cast<double>(diag.size());

            BoundPoint p;
            p.mask = e;
            p.n = n;
            p.lhs = sup.mean;
            p.lhs_se = sup.se;
            p.sigma = sigma;
            p.projected_envelope = pe_f;
            p.diagonal_max = std::sqrt(m2);
            const double L = report.v * std::log(std::max(report.A, static_cast<double>(n)));
            p.rhs_global = j_one * report.envelope_norm;
            p.rhs_local = sigma * std::pow(L, 0.5 * k) + p.diagonal_max / std::sqrt(static_cast<double>(n)) * std::pow(L, k);
            p.ratio = p.lhs / p.rhs_local;
            report.points.push_back(p);
        }

        BoundTrend trend;
        trend.mask = e;
        std::vector<double> x, ly, lr, lg, var, ratios, global;
        bool degenerate = true;
        for (const auto& p : report.points)
            if (p.mask == e)
            {
                degenerate = degenerate && p.lhs <= 1e-8;
                ratios.push_back(p.ratio);
                global.push_back(p.lhs / p.rhs_global);
            }
        trend.degenerate = degenerate;
        if (!degenerate)
        {
            for (const auto& p : report.points)
                if (p.mask == e)
                {
                    const double lhs = std::max(p.lhs, 1e-300);
                    x.push_back(std::log(static_cast<double>(p.n)));
                    ly.push_back(std::log(lhs));
                    lr.push_back(std::log(std::max(p.ratio, 1e-300)));
                    lg.push_back(std::log(std::max(p.lhs / p.rhs_global, 1e-300)));
                    var.push_back((p.lhs_se / lhs) * (p.lhs_se / lhs));
                }
            const auto s_lhs = ols_slope(x, ly, var);
            const auto s_ratio = ols_slope(x, lr, var);
            const auto s_global = ols_slope(x, lg, var);
            trend.lhs_slope = s_lhs.value;
            trend.lhs_slope_se = s_lhs.se;
            trend.ratio_slope = s_ratio.value;
            trend.ratio_slope_se = s_ratio.se;
            trend.global_ratio_slope = s_global.value;
            trend.global_ratio_slope_se = s_global.se;
            // The local bound's second-order term decays like n^{-1/2}, so its
            // ratio may rise toward a plateau; the trend is judged on the global bound.
            trend.non_increasing = s_global.value <= 2.0 * s_global.se;
            auto spread = [](const std::vector<double>& r) {
                const double med = median(r);
                return med > 0.0 ? *std::max_element(r.begin(), r.end()) / med
                                 : std::numeric_limits<double>::infinity();
            };
            trend.max_over_median = spread(ratios);
            trend.global_max_over_median = spread(global);
            trend.bounded = trend.max_over_median <= 2.0 && trend.global_max_over_median <= 2.0;
        }
        else
        {
            trend.non_increasing = true;
            trend.bounded = true;
        }
        report.trends.push_back(trend);
    }
    return report;
}

void write_bound_csv(const BoundReport& report, std::ostream& out)
{
    out << "mask,n,lhs,lhs_se,rhs_global,rhs_local,ratio\n";
    for (const auto& p : report.points)
        out << p.mask.to_string(report.order) << ',' << p.n << ',' << format_number(p.lhs) << ',' << format_number(p.lhs_se)
            << ',' << format_number(p.rhs_global) << ',' << format_number(p.rhs_local) << ','
            << format_number(p.ratio) << '\n';
}

}  // namespace mwdml
