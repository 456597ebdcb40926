#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mwdml/error.hpp"
#include "mwdml/harness.hpp"

namespace mwdml {
namespace {

using json = nlohmann::json;

[[noreturn]] void fail(const std::string& where, const std::string& what)
{
    throw ConfigError(where + ": " + what);
}

const json& require(const json& obj, const char* key, const std::string& where)
{
    if (!obj.is_object() || !obj.contains(key))
        fail(where, std::string("missing '") + key + "'");
    return obj.at(key);
}

double number(const json& v, const std::string& where)
{
    if (!v.is_number())
        fail(where, "expected a number");
    return v.get<double>();
}

int integer(const json& v, const std::string& where)
{
    if (!v.is_number_integer())
        fail(where, "expected an integer");
    return v.get<int>();
}

std::vector<double> numbers(const json& v, const std::string& where)
{
    if (v.is_number())
        return {v.get<double>()};
    if (!v.is_array())
        fail(where, "expected a number or an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i)
        out.push_back(number(v[i], where + "[" + std::to_string(i) + "]"));
    return out;
}

/// Scalars are broadcast to `width` components when width > 0.
std::vector<double> broadcast(const json& v, int width, const std::string& where)
{
    auto out = numbers(v, where);
    if (v.is_number() && width > 1)
        out.assign(static_cast<std::size_t>(width), out.front());
    if (width > 0 && static_cast<int>(out.size()) != width)
        fail(where, "expected " + std::to_string(width) + " components");
    return out;
}

std::string text(const json& v, const std::string& where)
{
    if (!v.is_string())
        fail(where, "expected a string");
    return v.get<std::string>();
}

Shape parse_shape(const json& v, const std::string& where)
{
    if (!v.is_array() || v.empty())
        fail(where, "shape must be a non-empty array of positive integers");
    std::vector<int> dims;
    for (std::size_t i = 0; i < v.size(); ++i)
    {
        const int n = integer(v[i], where);
        if (n < 1)
            fail(where, "dimensions must be positive");
        dims.push_back(n);
    }
    if (dims.size() > 16)
        fail(where, "at most 16 dimensions");
    return Shape(std::move(dims));
}

Mask parse_mask(const json& v, int order, const std::string& where)
{
    const auto s = text(v, where);
    if (static_cast<int>(s.size()) != order)
        fail(where, "mask '" + s + "' needs " + std::to_string(order) + " digits");
    try
    {
        const Mask m = Mask::parse(s);
        if (m.empty())
            fail(where, "mask must be nonzero");
        return m;
    }
    catch (const DomainError& e)
    {
        fail(where, e.what());
    }
}

LatentDist parse_law(const json& v, int width, const std::string& where)
{
    const auto kind = text(require(v, "kind", where), where + ".kind");
    try
    {
        if (kind == "normal")
        {
            const auto mean = v.contains("mean") ? broadcast(v["mean"], width, where + ".mean")
                                                 : std::vector<double>(static_cast<std::size_t>(width), 0.0);
            const auto sd = v.contains("sd") ? broadcast(v["sd"], width, where + ".sd")
                                             : std::vector<double>(static_cast<std::size_t>(width), 1.0);
            return LatentDist::normal(mean, sd);
        }
        if (kind == "uniform")
            return LatentDist::uniform(broadcast(require(v, "lo", where), width, where + ".lo"),
                                       broadcast(require(v, "hi", where), width, where + ".hi"));
        if (kind == "rademacher")
        {
            const auto scale = v.contains("scale") ? broadcast(v["scale"], width, where + ".scale")
                                                   : std::vector<double>(static_cast<std::size_t>(width), 1.0);
            return LatentDist::rademacher(scale);
        }
        if (kind == "grid")
            return LatentDist::grid(broadcast(require(v, "half_width", where), width, where + ".half_width"),
                                    integer(require(v, "levels", where), where + ".levels"));
        if (kind == "constant")
            return LatentDist::constant(broadcast(require(v, "value", where), width, where + ".value"));
        if (kind == "finite")
        {
            const auto& atoms_json = require(v, "atoms", where);
            if (!atoms_json.is_array())
                fail(where + ".atoms", "expected an array");
            std::vector<std::vector<double>> atoms;
            for (std::size_t i = 0; i < atoms_json.size(); ++i)
                atoms.push_back(numbers(atoms_json[i], where + ".atoms"));
            std::vector<double> probs;
            if (v.contains("probs"))
                probs = numbers(v["probs"], where + ".probs");
            else
                probs.assign(atoms.size(), 1.0 / static_cast<double>(atoms.size()));
            return LatentDist::finite(std::move(atoms), std::move(probs));
        }
    }
    catch (const DomainError& e)
    {
        fail(where, e.what());
    }
    fail(where + ".kind", "unknown latent law '" + kind + "'");
}

std::shared_ptr<const Composer> parse_tau(const json& v, int order, const std::string& where)
{
    const auto name = text(require(v, "name", where), where + ".name");
    const json params = v.value("params", json::object());
    const std::string pw = where + ".params";
    try
    {
        if (name == "additive")
        {
            std::vector<double> weights;
            if (params.contains("weights"))
            {
                weights.assign(std::size_t{1} << order, 0.0);
                const auto& w = params["weights"];
                if (!w.is_object())
                    fail(pw + ".weights", "expected an object keyed by mask");
                for (auto it = w.begin(); it != w.end(); ++it)
                    weights[parse_mask(it.key(), order, pw + ".weights").bits()] =
                        number(it.value(), pw + ".weights." + it.key());
            }
            return std::make_shared<AdditiveComposer>(order, params.contains("offset")
                                                                 ? number(params["offset"], pw + ".offset")
                                                                 : 0.0,
                                                      std::move(weights));
        }
        if (name == "product")
        {
            auto masks = [&](const char* key) {
                std::vector<Mask> out;
                if (!params.contains(key))
                    return out;
                if (!params[key].is_array())
                    fail(pw + "." + key, "expected an array of masks");
                for (const auto& m : params[key])
                    out.push_back(parse_mask(m, order, pw + "." + key));
                return out;
            };
            return std::make_shared<ProductComposer>(masks("factors"), masks("added"));
        }
        if (name == "plr")
            return std::make_shared<PlrComposer>(order, number(require(params, "theta0", pw), pw + ".theta0"),
                                                 numbers(require(params, "gamma", pw), pw + ".gamma"),
                                                 numbers(require(params, "delta", pw), pw + ".delta"));
        if (name == "iv")
            return std::make_shared<IvComposer>(order, number(require(params, "theta0", pw), pw + ".theta0"),
                                                number(require(params, "pi", pw), pw + ".pi"),
                                                params.contains("rho") ? number(params["rho"], pw + ".rho") : 0.0);
    }
    catch (const DomainError& e)
    {
        fail(where, e.what());
    }
    fail(where + ".name", "unknown composition map '" + name + "'");
}

DgpSpec parse_dgp(const json& v)
{
    const std::string where = "dgp";
    if (!v.is_object())
        fail(where, "expected an object");
    Shape shape = parse_shape(require(v, "shape", where), where + ".shape");
    const int order = shape.order();
    auto tau = parse_tau(require(v, "tau", where), order, where + ".tau");

    const json& latent = require(v, "latent", where);
    DgpSpec spec;
    spec.shape = shape;
    spec.tau = tau;
    spec.latent.assign(std::size_t{1} << order, LatentDist::constant({0.0}));
    const auto masks = nonzero_masks(order);
    const json* fallback = latent.contains("default") ? &latent["default"] : nullptr;
    const json overrides = latent.value("masks", json::object());
    if (!overrides.is_object())
        fail(where + ".latent.masks", "expected an object keyed by mask");
    for (auto it = overrides.begin(); it != overrides.end(); ++it)
        parse_mask(it.key(), order, where + ".latent.masks");
    for (Mask e : masks)
    {
        const auto key = e.to_string(order);
        const json* law = overrides.contains(key) ? &overrides[key] : fallback;
        if (!law)
            fail(where + ".latent", "no law for mask " + key + " and no default");
        const int width = law->contains("width") ? integer((*law)["width"], where + ".latent.width")
                                                 : tau->required_width(e);
        spec.latent[e.bits()] = parse_law(*law, width, where + ".latent." + key);
    }
    if (v.contains("degenerate"))
    {
        if (!v["degenerate"].is_array())
            fail(where + ".degenerate", "expected an array of masks");
        for (const auto& m : v["degenerate"])
            spec.force_constant(parse_mask(m, order, where + ".degenerate"));
    }
    try
    {
        spec.validate();
    }
    catch (const DomainError& e)
    {
        fail(where, e.what());
    }
    return spec;
}

ProjectionOptions parse_projection(const json& v, const std::string& where, ProjectionOptions out)
{
    if (v.contains("mode"))
    {
        const auto mode = text(v["mode"], where + ".mode");
        if (mode == "exact")
            out.mode = ProjectionMode::Exact;
        else if (mode == "monte_carlo")
            out.mode = ProjectionMode::MonteCarlo;
        else
            fail(where + ".mode", "expected 'exact' or 'monte_carlo'");
    }
    if (v.contains("draws"))
        out.draws = integer(v["draws"], where + ".draws");
    if (out.mode == ProjectionMode::MonteCarlo && out.draws < 1)
        fail(where + ".draws", "Monte Carlo projections need draws >= 1");
    return out;
}

FunctionConfig parse_function(const json& v, const std::string& where)
{
    FunctionConfig f;
    f.kind = v.contains("kind") ? text(v["kind"], where + ".kind") : f.kind;
    if (f.kind != "field" && f.kind != "square" && f.kind != "indicator")
        fail(where + ".kind", "expected field, square or indicator");
    if (v.contains("field"))
        f.field = text(v["field"], where + ".field");
    if (v.contains("threshold"))
        f.threshold = number(v["threshold"], where + ".threshold");
    return f;
}

Eigen::VectorXd to_vector(const std::vector<double>& v)
{
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

McConfig parse_config(const std::string& json_text)
{
    json root;
    try
    {
        root = json::parse(json_text);
    }
    catch (const json::exception& e)
    {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!root.is_object())
        throw ConfigError("config must be a JSON object");

    McConfig c;
    try
    {
        c.dgp = parse_dgp(require(root, "dgp", "config"));
        const int order = c.dgp.shape.order();

        if (root.contains("seed"))
        {
            if (!root["seed"].is_number_unsigned())
                fail("seed", "expected a non-negative integer");
            c.seed = root["seed"].get<std::uint64_t>();
        }
        if (root.contains("replications"))
            c.replications = integer(root["replications"], "replications");
        if (c.replications < 1)
            fail("replications", "must be at least 1");
        if (root.contains("level"))
            c.level = number(root["level"], "level");
        if (!(c.level > 0.0 && c.level < 1.0))
            fail("level", "must lie in (0, 1)");

        if (root.contains("shapes"))
        {
            const auto& shapes = root["shapes"];
            if (!shapes.is_array() || shapes.empty())
                fail("shapes", "expected a non-empty array of shapes");
            for (const auto& s : shapes)
            {
                c.shapes.push_back(parse_shape(s, "shapes"));
                if (c.shapes.back().order() != order)
                    fail("shapes", "every shape needs " + std::to_string(order) + " dimensions");
            }
        }
        else
            c.shapes.push_back(c.dgp.shape);

        const json model = root.value("model", json::object());
        if (model.contains("name"))
            c.model.name = text(model["name"], "model.name");
        if (c.model.name != "location" && c.model.name != "iv" && c.model.name != "plr" &&
            c.model.name != "plr_naive")
            fail("model.name", "unknown model '" + c.model.name + "'");
        const json mp = model.value("params", json::object());
        if (mp.contains("y"))
            c.model.y = text(mp["y"], "model.params.y");
        if (mp.contains("d"))
            c.model.d = text(mp["d"], "model.params.d");
        if (mp.contains("instruments"))
        {
            c.model.instruments.clear();
            for (const auto& z : mp["instruments"])
                c.model.instruments.push_back(text(z, "model.params.instruments"));
            if (c.model.instruments.empty())
                fail("model.params.instruments", "need at least one instrument");
        }
        // Fail early on unknown field names.
        make_model(c.model, c.dgp.tau->fields());

        const json learner = root.value("learner", json::object());
        if (learner.contains("name"))
            c.learner.name = text(learner["name"], "learner.name");
        if (c.learner.name != "oracle" && c.learner.name != "lasso" && c.learner.name != "tree")
            fail("learner.name", "expected oracle, lasso or tree");
        const json lp = learner.value("params", json::object());
        if (lp.contains("lambda") && !lp["lambda"].is_null())
        {
            c.learner.lambda = number(lp["lambda"], "learner.params.lambda");
            if (!(*c.learner.lambda >= 0.0))
                fail("learner.params.lambda", "must be nonnegative");
        }
        if (lp.contains("link"))
        {
            const auto link = text(lp["link"], "learner.params.link");
            if (link == "identity")
                c.learner.link = Link::Identity;
            else if (link == "logistic")
                c.learner.link = Link::Logistic;
            else
                fail("learner.params.link", "expected identity or logistic");
        }
        if (lp.contains("max_leaves"))
            c.learner.tree.max_leaves = integer(lp["max_leaves"], "learner.params.max_leaves");
        if (lp.contains("min_leaf"))
            c.learner.tree.min_leaf = integer(lp["min_leaf"], "learner.params.min_leaf");
        if (c.learner.tree.max_leaves < 1 || c.learner.tree.min_leaf < 1)
            fail("learner.params", "tree sizes must be positive");
        if (lp.contains("features"))
            for (const auto& f : lp["features"])
                c.learner.features.push_back(text(f, "learner.params.features"));
        for (const auto& f : c.learner.features)
        {
            const auto& fields = c.dgp.tau->fields();
            if (std::find(fields.begin(), fields.end(), f) == fields.end())
                fail("learner.params.features", "unknown field '" + f + "'");
        }
        if (c.learner.name == "oracle" && c.model.name != "location" && c.model.name != "iv")
        {
            const auto eta = c.dgp.tau->oracle_nuisance();
            auto tmp = make_model(c.model, c.dgp.tau->fields());
            for (const auto& n : tmp->nuisance_names())
                if (!eta.has(n))
                    fail("learner", "the DGP has no closed-form nuisance '" + n + "' for the oracle learner");
        }

        const int d = 1;  // every bundled model has a scalar parameter
        c.estimation.theta_start = Eigen::VectorXd::Zero(d);
        const json est = root.value("estimation", json::object());
        if (est.contains("theta_start"))
            c.estimation.theta_start = to_vector(broadcast(est["theta_start"], d, "estimation.theta_start"));
        if (est.contains("theta_box"))
        {
            const auto& box = est["theta_box"];
            if (box.contains("lower"))
                c.estimation.lower = to_vector(broadcast(box["lower"], d, "estimation.theta_box.lower"));
            if (box.contains("upper"))
                c.estimation.upper = to_vector(broadcast(box["upper"], d, "estimation.theta_box.upper"));
            for (Eigen::Index j = 0; j < c.estimation.lower.size() && j < c.estimation.upper.size(); ++j)
                if (!(c.estimation.lower(j) < c.estimation.upper(j)))
                    fail("estimation.theta_box", "lower must be below upper");
        }
        if (est.contains("weighting"))
        {
            const auto w = text(est["weighting"], "estimation.weighting");
            if (w == "identity")
                c.estimation.weighting.mode = WeightingMode::Identity;
            else if (w == "two_step")
                c.estimation.weighting.mode = WeightingMode::TwoStep;
            else
                fail("estimation.weighting", "expected identity or two_step");
        }
        if (est.contains("ridge"))
            c.estimation.weighting.ridge = number(est["ridge"], "estimation.ridge");
        if (!(c.estimation.weighting.ridge >= 0.0))
            fail("estimation.ridge", "must be nonnegative");
        if (est.contains("tol"))
            c.estimation.tol = number(est["tol"], "estimation.tol");
        if (!(c.estimation.tol > 0.0))
            fail("estimation.tol", "must be positive");
        if (est.contains("max_iter"))
            c.estimation.max_iter = integer(est["max_iter"], "estimation.max_iter");
        if (c.estimation.max_iter < 1)
            fail("estimation.max_iter", "must be positive");

        if (root.contains("variance"))
        {
            const auto v = text(root["variance"], "variance");
            if (v == "psihat")
                c.variance = VarianceMode::PsiHat;
            else if (v == "cgm")
                c.variance = VarianceMode::Cgm;
            else
                fail("variance", "expected psihat or cgm");
        }

        if (root.contains("theta0"))
            c.theta0 = broadcast(root["theta0"], d, "theta0");
        else if (!c.dgp.tau->theta0())
            fail("theta0", "the composition map has no built-in parameter; set theta0");

        if (root.contains("oracle"))
        {
            const auto& o = root["oracle"];
            if (o.is_boolean())
                c.oracle.enabled = o.get<bool>();
            else
            {
                c.oracle.enabled = o.value("enabled", true);
                c.oracle.projection = parse_projection(o, "oracle", c.oracle.projection);
            }
        }

        if (root.contains("constants"))
        {
            const auto& k = root["constants"];
            if (k.contains("C1"))
                c.constants.C1 = number(k["C1"], "constants.C1");
            if (k.contains("C2"))
                c.constants.C2 = number(k["C2"], "constants.C2");
            if (k.contains("C4"))
                c.constants.C4 = number(k["C4"], "constants.C4");
        }

        if (root.contains("output"))
        {
            const auto& o = root["output"];
            if (o.contains("replications"))
                c.replications_file = text(o["replications"], "output.replications");
            if (o.contains("summary"))
                c.summary_file = text(o["summary"], "output.summary");
        }

        if (root.contains("decompose"))
        {
            const auto& dc = root["decompose"];
            DecomposeConfig out;
            out.function = parse_function(dc.value("function", json::object()), "decompose.function");
            out.projection = parse_projection(dc, "decompose", {ProjectionMode::Exact, 0, 0});
            make_function(out.function, c.dgp.tau->fields());
            c.decompose = out;
        }

        if (root.contains("bounds"))
        {
            const auto& b = root["bounds"];
            BoundsConfig out;
            if (b.contains("field"))
                out.field = text(b["field"], "bounds.field");
            out.thresholds = numbers(require(b, "thresholds", "bounds"), "bounds.thresholds");
            if (out.thresholds.empty())
                fail("bounds.thresholds", "need at least one threshold");
            if (b.contains("A"))
                out.A = number(b["A"], "bounds.A");
            if (b.contains("v"))
                out.v = number(b["v"], "bounds.v");
            if (b.contains("masks"))
                for (const auto& m : b["masks"])
                    out.masks.push_back(parse_mask(m, order, "bounds.masks"));
            else
                out.masks = nonzero_masks(order);
            if (b.contains("n_grid"))
            {
                out.options.n_grid.clear();
                for (const auto& n : b["n_grid"])
                    out.options.n_grid.push_back(integer(n, "bounds.n_grid"));
            }
            if (b.contains("replications"))
                out.options.replications = integer(b["replications"], "bounds.replications");
            if (b.contains("q"))
                out.options.q = number(b["q"], "bounds.q");
            if (b.contains("diagonal_draws"))
                out.options.diagonal_draws = integer(b["diagonal_draws"], "bounds.diagonal_draws");
            out.options.projection =
                parse_projection(b.value("projection", json::object()), "bounds.projection",
                                 {ProjectionMode::Exact, 0, 0});
            const auto& fields = c.dgp.tau->fields();
            if (std::find(fields.begin(), fields.end(), out.field) == fields.end())
                fail("bounds.field", "unknown field '" + out.field + "'");
            c.bounds = out;
        }
    }
    catch (const DomainError& e)
    {
        throw ConfigError(e.what());
    }
    catch (const json::exception& e)
    {
        throw ConfigError(std::string("config has the wrong structure: ") + e.what());
    }
    reseed(c, c.seed);
    return c;
}

void reseed(McConfig& config, std::uint64_t seed)
{
    config.seed = seed;
    config.oracle.projection.seed = derive_seed(seed, {0x0AC1Eull});
    if (config.decompose)
        config.decompose->projection.seed = derive_seed(seed, {0xDEC0ull});
    if (config.bounds)
    {
        config.bounds->options.seed = seed;
        config.bounds->options.projection.seed = derive_seed(seed, {0xB0Dull});
    }
}

McConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot read config file " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    if (in.bad())
        throw IoError("failed while reading config file " + path.string());
    return parse_config(buffer.str());
}

}  // namespace mwdml
