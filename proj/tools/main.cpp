#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "mwdml/bounds.hpp"
#include "mwdml/csv.hpp"
#include "mwdml/error.hpp"
#include "mwdml/harness.hpp"
#include "mwdml/partition.hpp"
#include "mwdml/projection.hpp"
#include "mwdml/variance.hpp"

namespace fs = std::filesystem;
using namespace mwdml;

namespace {

enum ExitCode
{
    kOk = 0,
    kFailure = 1,
    kConfig = 2,
    kIo = 3
};

struct Globals
{
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    int threads = 1;
};

McConfig require_config(const Globals& g)
{
    if (g.config.empty())
        throw ConfigError("this command needs --config <path>");
    McConfig c = load_config(g.config);
    if (g.seed)
        reseed(c, *g.seed);
    return c;
}

/// Writes to <out>/<name> when --out is set, else to stdout.
void emit(const Globals& g, const std::string& name, const std::function<void(std::ostream&)>& body)
{
    if (g.out.empty())
    {
        body(std::cout);
        std::cout.flush();
        if (!std::cout)
            throw IoError("failed while writing to stdout");
        return;
    }
    std::error_code ec;
    fs::create_directories(g.out, ec);
    if (ec)
        throw IoError("cannot create output directory " + g.out + ": " + ec.message());
    const fs::path path = fs::path(g.out) / name;
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot open " + path.string() + " for writing");
    body(out);
    out.flush();
    if (!out)
        throw IoError("failed while writing " + path.string());
}

Shape parse_shape_arg(const std::string& text)
{
    std::vector<int> dims;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
    {
        try
        {
            std::size_t used = 0;
            const int n = std::stoi(item, &used);
            if (used != item.size() || n < 1)
                throw ConfigError("");
            dims.push_back(n);
        }
        catch (const std::exception&)
        {
            throw ConfigError("--shape expects positive integers separated by commas, got '" + text + "'");
        }
    }
    if (dims.empty())
        throw ConfigError("--shape is empty");
    return Shape(std::move(dims));
}

int cmd_simulate(const Globals& g)
{
    const McConfig c = require_config(g);
    const auto sample = simulate(c.dgp, c.seed);
    emit(g, "sample.csv", [&](std::ostream& o) { write_sample_csv(sample, o); });
    return kOk;
}

int cmd_partition(const Globals& g, const std::string& shape_text, const std::string& mask_text)
{
    const Shape shape = parse_shape_arg(shape_text);
    if (static_cast<int>(mask_text.size()) != shape.order())
        throw ConfigError("--mask needs one 0/1 digit per dimension");
    Mask mask;
    try
    {
        mask = Mask::parse(mask_text);
    }
    catch (const DomainError& e)
    {
        throw ConfigError(e.what());
    }
    if (mask.empty())
        throw ConfigError("--mask must be nonzero");
    const auto partition = build_transversal_partition(shape, mask);
    const auto report = verify_partition(partition);
    emit(g, "partition.csv", [&](std::ostream& o) { write_partition_csv(partition, o); });
    std::cerr << "groups=" << partition.groups.size() << " covers=" << report.covers
              << " disjoint=" << report.disjoint << " transversal=" << report.transversal
              << " group_size=" << report.group_size_ok << '\n';
    return report.ok() ? kOk : kFailure;
}

int cmd_decompose(const Globals& g)
{
    const McConfig c = require_config(g);
    DecomposeConfig dc = c.decompose.value_or(DecomposeConfig{});
    if (!c.decompose)
        dc.projection.seed = derive_seed(c.seed, {0xDEC0ull});
    const auto f = make_function(dc.function, c.dgp.tau->fields());
    const auto sample = simulate(c.dgp, c.seed);
    const auto h = hoeffding_decompose(f, c.dgp, sample, dc.projection);
    const int K = c.dgp.shape.order();
    emit(g, "decompose.csv", [&](std::ostream& o) {
        o << "term,count,value\n";
        for (std::size_t i = 0; i < h.masks.size(); ++i)
            o << h.masks[i].to_string(K) << ',' << h.counts[i] << ',' << format_number(h.values[i]) << '\n';
        o << "sum," << h.masks.size() << ',' << format_number(h.total()) << '\n';
        o << "sample_mean," << sample.cells() << ',' << format_number(h.sample_mean) << '\n';
        o << "population_mean,1," << format_number(h.population_mean) << '\n';
        o << "reconstruction_error,0," << format_number(h.reconstruction_error()) << '\n';
    });
    return kOk;
}

int cmd_estimate(const Globals& g)
{
    const McConfig c = require_config(g);
    const auto r = run_replication(c, 0, 0);
    if (r.failed)
        std::cerr << "estimation failed: " << r.error << '\n';
    const Eigen::VectorXd theta0 = true_theta(c);
    const double z = normal_critical_value(c.level);
    emit(g, "estimate.csv", [&](std::ostream& o) {
        o << "param,theta_hat,se,lower,upper,theta0,covered,flags\n";
        for (Eigen::Index j = 0; j < theta0.size(); ++j)
        {
            const double th = j < r.theta_hat.size() ? r.theta_hat(j) : std::nan("");
            const double se = j < r.se.size() ? r.se(j) : std::nan("");
            o << j + 1 << ',' << format_number(th) << ',' << format_number(se) << ',' << format_number(th - z * se)
              << ',' << format_number(th + z * se) << ',' << format_number(theta0(j)) << ',' << (r.covered ? 1 : 0)
              << ',' << r.flags() << '\n';
        }
    });

    // Prediction dump of the fitted nuisances on the same sample, for audit.
    if (!g.out.empty() && !r.failed)
    {
        const DgpSpec spec = c.dgp.reshaped(c.shapes.front());
        const auto sample = simulate(spec, derive_seed(c.seed, {0, 0}));
        const auto model = make_model(c.model, sample.fields());
        const auto nuisance = fit_nuisance(c, *model, sample);
        if (!nuisance.names.empty())
            emit(g, "nuisance.csv", [&](std::ostream& o) {
                const int K = spec.shape.order();
                for (int k = 1; k <= K; ++k)
                    o << (k > 1 ? "," : "") << "i_" << k;
                for (const auto& n : nuisance.names)
                    o << ',' << n;
                o << '\n';
                for (std::size_t cell = 0; cell < sample.cells(); ++cell)
                {
                    const auto idx = from_linear(spec.shape, cell);
                    for (int k = 0; k < K; ++k)
                        o << (k > 0 ? "," : "") << idx.coords[static_cast<std::size_t>(k)];
                    for (const auto& n : nuisance.names)
                        o << ',' << format_number(nuisance.eta(n, sample.record(cell)));
                    o << '\n';
                }
            });
    }
    return r.failed ? kFailure : kOk;
}

int cmd_mc(const Globals& g)
{
    const McConfig c = require_config(g);
    const auto result = run_monte_carlo(c, g.threads);
    emit_reports(c, result, g.out.empty() ? fs::path(".") : fs::path(g.out));
    for (const auto& s : result.summaries)
        std::cerr << "shape=" << s.shape.to_string() << " used=" << s.used << '/' << s.replications
                  << " coverage=" << format_number(s.coverage) << '\n';
    return kOk;
}

int cmd_bounds(const Globals& g)
{
    const McConfig c = require_config(g);
    if (!c.bounds)
        throw ConfigError("bounds: the config has no 'bounds' block");
    BoundsConfig b = *c.bounds;
    b.options.threads = g.threads;
    const auto& fields = c.dgp.tau->fields();
    const int field = static_cast<int>(std::find(fields.begin(), fields.end(), b.field) - fields.begin());
    FunctionGrid grid = threshold_grid(field, b.thresholds);
    grid.vc_A = b.A;
    grid.vc_v = b.v;
    grid = center_grid(grid, c.dgp, b.options.projection);
    const auto report = bound_check(grid, c.dgp, b.masks, b.options);
    emit(g, "bounds.csv", [&](std::ostream& o) { write_bound_csv(report, o); });
    for (const auto& t : report.trends)
        std::cerr << "mask=" << t.mask.to_string(report.order)
                  << " global_ratio_slope=" << format_number(t.global_ratio_slope)
                  << " local_ratio_slope=" << format_number(t.ratio_slope)
                  << " max_over_median=" << format_number(std::max(t.max_over_median, t.global_max_over_median))
                  << " ok=" << t.ok() << '\n';
    return kOk;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Multiway-clustered debiased estimation toolkit"};
    app.require_subcommand(1);
    Globals g;
    std::uint64_t seed = 0;
    app.add_option("--config", g.config, "JSON config file");
    auto* seed_opt = app.add_option("--seed", seed, "base seed (overrides the config)");
    app.add_option("--out", g.out, "output directory (default: stdout, or . for mc)");
    app.add_option("--threads", g.threads, "worker threads")->check(CLI::PositiveNumber);

    auto* sim = app.add_subcommand("simulate", "draw one sample and write it as CSV")->fallthrough();
    auto* part = app.add_subcommand("partition", "transversal partition of I_{N,e}")->fallthrough();
    std::string shape_text, mask_text;
    part->add_option("--shape", shape_text, "dimensions, e.g. 3,2")->required();
    part->add_option("--mask", mask_text, "mask digits, e.g. 11")->required();
    auto* dec = app.add_subcommand("decompose", "Hoeffding components of one sample")->fallthrough();
    auto* est = app.add_subcommand("estimate", "one estimation run with standard errors")->fallthrough();
    auto* mc = app.add_subcommand("mc", "Monte Carlo coverage experiment")->fallthrough();
    auto* bnd = app.add_subcommand("bounds", "maximal inequality scaling check")->fallthrough();

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::CallForHelp& e)
    {
        return app.exit(e);
    }
    catch (const CLI::ParseError& e)
    {
        app.exit(e);
        return kConfig;
    }
    if (seed_opt->count() > 0)
        g.seed = seed;

    try
    {
        if (sim->parsed())
            return cmd_simulate(g);
        if (part->parsed())
            return cmd_partition(g, shape_text, mask_text);
        if (dec->parsed())
            return cmd_decompose(g);
        if (est->parsed())
            return cmd_estimate(g);
        if (mc->parsed())
            return cmd_mc(g);
        if (bnd->parsed())
            return cmd_bounds(g);
    }
    catch (const ConfigError& e)
    {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    }
    catch (const DomainError& e)
    {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    }
    catch (const IoError& e)
    {
        std::cerr << "i/o error: " << e.what() << '\n';
        return kIo;
    }
    catch (const std::exception& e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return kFailure;
    }
    return kFailure;
}
