#include "mwdml/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "mwdml/csv.hpp"
#include "mwdml/error.hpp"
#include "mwdml/parallel.hpp"

namespace mwdml {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

int field_of(const std::vector<std::string>& fields, const std::string& name)
{
    auto it = std::find(fields.begin(), fields.end(), name);
    if (it == fields.end())
        throw DomainError("unknown field '" + name + "'");
    return static_cast<int>(it - fields.begin());
}

std::vector<int> feature_columns(const McConfig& config, const std::vector<std::string>& fields)
{
    std::vector<int> cols;
    if (!config.learner.features.empty())
    {
        for (const auto& f : config.learner.features)
            cols.push_back(field_of(fields, f));
        return cols;
    }
    const auto& m = config.model;
    for (std::size_t j = 0; j < fields.size(); ++j)
    {
        const auto& f = fields[j];
        if (f == m.y || f == m.d || std::find(m.instruments.begin(), m.instruments.end(), f) != m.instruments.end())
            continue;
        cols.push_back(static_cast<int>(j));
    }
    if (cols.empty())
        throw DomainError("no feature columns left for the nuisance learner");
    return cols;
}

Eigen::MatrixXd feature_matrix(const ClusteredSample& sample, const std::vector<int>& cols)
{
    Eigen::MatrixXd X(static_cast<Eigen::Index>(sample.cells()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < sample.cells(); ++c)
    {
        const auto r = sample.record(c);
        for (std::size_t j = 0; j < cols.size(); ++j)
            X(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(j)) = r[static_cast<std::size_t>(cols[j])];
    }
    return X;
}

Eigen::RowVectorXd feature_row(Record x, const std::vector<int>& cols)
{
    Eigen::RowVectorXd row(static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j)
        row(static_cast<Eigen::Index>(j)) = x[static_cast<std::size_t>(cols[j])];
    return row;
}

double frobenius_rel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& ref)
{
    const double scale = ref.norm();
    if (!(scale > 0.0))
        return kNaN;
    return (a - ref).norm() / scale;
}

double normal_cdf(double z)
{
    return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

ShapeSummary summarize(const McConfig& config, const Shape& shape, int shape_id,
                       const std::vector<ReplicationRecord>& records, const std::optional<OracleVariance>& oracle,
                       int d)
{
    ShapeSummary s;
    s.shape = shape;
    s.replications = config.replications;
    s.unbalanced = static_cast<double>(shape.min_dim()) / shape.max_dim() < 0.2;
    s.degenerate = oracle && oracle->degenerate;
    if (oracle && oracle->V.size() > 0)
        s.V_oracle = oracle->V;
    const Eigen::VectorXd theta0 = true_theta(config);

    std::vector<const ReplicationRecord*> used;
    for (const auto& r : records)
    {
        if (r.shape_id != shape_id)
            continue;
        if (r.failed)
            ++s.discarded_error;
        else if (!r.converged)
            ++s.discarded_nonconvergence;
        else if (r.boundary)
            ++s.discarded_boundary;
        else
            used.push_back(&r);
    }
    s.used = static_cast<int>(used.size());

    s.bias = Eigen::VectorXd::Constant(d, kNaN);
    s.rmse = s.bias;
    s.mean_se = s.bias;
    s.sd = s.bias;
    s.ks = s.bias;
    s.coverage = kNaN;
    s.coverage_se = kNaN;
    s.mean_V = Eigen::MatrixXd::Constant(d, d, kNaN);
    const bool oracle_scale = s.V_oracle && !s.degenerate && (s.V_oracle->diagonal().array() > 0.0).all();
    s.ks_standardization = oracle_scale ? "oracle" : "vhat";
    if (used.empty())
        return s;

    const double m = static_cast<double>(used.size());
    Eigen::VectorXd sum_err = Eigen::VectorXd::Zero(d), sum_sq = Eigen::VectorXd::Zero(d),
                    sum_se = Eigen::VectorXd::Zero(d), sum_theta = Eigen::VectorXd::Zero(d);
    Eigen::MatrixXd sum_V = Eigen::MatrixXd::Zero(d, d);
    double covered = 0.0, rel_sum = 0.0;
    std::vector<double> lambda_sum;
    for (const auto* r : used)
    {
        const Eigen::VectorXd err = r->theta_hat - theta0;
        sum_err += err;
        sum_sq += err.cwiseAbs2();
        sum_se += r->se;
        sum_theta += r->theta_hat;
        sum_V += r->V;
        covered += r->covered ? 1.0 : 0.0;
        if (s.V_oracle)
            rel_sum += frobenius_rel(r->V, *s.V_oracle);
        lambda_sum.resize(std::max(lambda_sum.size(), r->lambdas.size()), 0.0);
        for (std::size_t j = 0; j < r->lambdas.size(); ++j)
            lambda_sum[j] += r->lambdas[j];
    }
    s.bias = sum_err / m;
    s.rmse = (sum_sq / m).cwiseSqrt();
    s.mean_se = sum_se / m;
    const Eigen::VectorXd mean_theta = sum_theta / m;
    Eigen::VectorXd ss = Eigen::VectorXd::Zero(d);
    for (const auto* r : used)
        ss += (r->theta_hat - mean_theta).cwiseAbs2();
    s.sd = used.size() > 1 ? Eigen::VectorXd((ss / (m - 1.0)).cwiseSqrt()) : Eigen::VectorXd::Constant(d, kNaN);
    s.coverage = covered / m;
    s.coverage_se = std::sqrt(s.coverage * (1.0 - s.coverage) / m);
    s.mean_V = sum_V / m;
    if (s.V_oracle)
    {
        s.v_rel_error = frobenius_rel(s.mean_V, *s.V_oracle);
        s.v_rel_error_mean = rel_sum / m;
    }
    for (double l : lambda_sum)
        s.mean_lambdas.push_back(l / m);

    const double root_n = std::sqrt(static_cast<double>(shape.min_dim()));
    for (int j = 0; j < d; ++j)
    {
        std::vector<double> z;
        z.reserve(used.size());
        for (const auto* r : used)
        {
            const double err = r->theta_hat(j) - theta0(j);
            z.push_back(oracle_scale ? root_n * err / std::sqrt((*s.V_oracle)(j, j)) : err / r->se(j));
        }
        s.ks(j) = ks_distance_normal(std::move(z));
    }
    return s;
}

nlohmann::ordered_json vector_json(const Eigen::VectorXd& v)
{
    auto out = nlohmann::ordered_json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i)
        out.push_back(v(i));
    return out;
}

nlohmann::ordered_json matrix_json(const Eigen::MatrixXd& m)
{
    auto out = nlohmann::ordered_json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        out.push_back(vector_json(m.row(i).transpose()));
    return out;
}

const char* variance_name(VarianceMode mode)
{
    return mode == VarianceMode::PsiHat ? "psihat" : "cgm";
}

}  // namespace

std::unique_ptr<MomentModel> make_model(const ModelConfig& config, const std::vector<std::string>& fields)
{
    if (config.name == "location")
        return std::make_unique<LocationModel>(field_of(fields, config.y));
    if (config.name == "iv")
    {
        std::vector<int> z;
        for (const auto& name : config.instruments)
            z.push_back(field_of(fields, name));
        return std::make_unique<IvModel>(field_of(fields, config.y), field_of(fields, config.d), std::move(z));
    }
    if (config.name == "plr")
        return std::make_unique<PlrModel>(field_of(fields, config.y), field_of(fields, config.d));
    if (config.name == "plr_naive")
        return std::make_unique<NonOrthogonalPlrModel>(field_of(fields, config.y), field_of(fields, config.d));
    throw DomainError("unknown model '" + config.name + "'");
}

ScalarFn make_function(const FunctionConfig& config, const std::vector<std::string>& fields)
{
    const auto j = static_cast<std::size_t>(field_of(fields, config.field));
    if (config.kind == "field")
        return [j](Record x) { return x[j]; };
    if (config.kind == "square")
        return [j](Record x) { return x[j] * x[j]; };
    if (config.kind == "indicator")
    {
        const double t = config.threshold;
        return [j, t](Record x) { return x[j] <= t ? 1.0 : 0.0; };
    }
    throw DomainError("unknown function kind '" + config.kind + "'");
}

Eigen::VectorXd true_theta(const McConfig& config)
{
    std::vector<double> t;
    if (config.theta0)
        t = *config.theta0;
    else if (auto builtin = config.dgp.tau->theta0())
        t = *builtin;
    else
        throw DomainError("no true parameter available");
    return Eigen::Map<const Eigen::VectorXd>(t.data(), static_cast<Eigen::Index>(t.size()));
}

NuisanceFit fit_nuisance(const McConfig& config, const MomentModel& model, const ClusteredSample& sample)
{
    NuisanceFit out;
    out.names = model.nuisance_names();
    if (out.names.empty())
        return out;
    if (config.learner.name == "oracle")
    {
        const auto truth = config.dgp.tau->oracle_nuisance();
        for (const auto& n : out.names)
            out.eta.set(n, truth.get(n));
        return out;
    }

    // Each nuisance component is a regression of one field on the features.
    auto target_of = [&](const std::string& n) -> std::string {
        if (model.name() == "plr" && n == "l")
            return config.model.y;
        if (model.name() == "plr" && n == "m")
            return config.model.d;
        throw DomainError("learner '" + config.learner.name + "' cannot fit nuisance '" + n + "' of model " +
                          model.name() + "; use the oracle learner");
    };

    const auto cols = feature_columns(config, sample.fields());
    const Eigen::MatrixXd X = feature_matrix(sample, cols);
    for (const auto& n : out.names)
    {
        const auto target = sample.column(target_of(n));
        const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(target.data(), static_cast<Eigen::Index>(target.size()));
        if (config.learner.name == "lasso")
        {
            LassoFit fit;
            if (config.learner.lambda)
                fit = fit_lasso({*config.learner.lambda, config.learner.link}, X, y);
            else
                fit = fit_lasso_default(X, y, sample.shape(), config.learner.link);
            out.lambdas.push_back(fit.lambda);
            out.eta.set(n, [fit, cols](Record x) { return fit.predict_one(feature_row(x, cols)); });
        }
        else
        {
            auto tree = fit_tree(config.learner.tree, X, y);
            out.lambdas.push_back(kNaN);
            out.eta.set(n, [tree, cols](Record x) { return tree.predict_one(feature_row(x, cols)); });
        }
    }
    return out;
}

std::string ReplicationRecord::flags() const
{
    std::string out;
    auto add = [&](const char* f) {
        if (!out.empty())
            out += '|';
        out += f;
    };
    if (failed)
        add("error");
    if (!failed && !converged)
        add("nonconverged");
    if (boundary)
        add("boundary");
    if (rank_deficient)
        add("rank_deficient");
    return out.empty() ? "ok" : out;
}

ReplicationRecord run_replication(const McConfig& config, int shape_id, int rep)
{
    ReplicationRecord r;
    r.shape_id = shape_id;
    r.rep = rep;
    try
    {
        const DgpSpec spec = config.dgp.reshaped(config.shapes.at(static_cast<std::size_t>(shape_id)));
        auto sample = simulate(spec, derive_seed(config.seed, {static_cast<std::uint64_t>(shape_id),
                                                               static_cast<std::uint64_t>(rep)}));
        sample.drop_latent();
        const auto model = make_model(config.model, sample.fields());
        const auto nuisance = fit_nuisance(config, *model, sample);
        r.lambdas = nuisance.lambdas;

        const GmmFit fit = solve_gmm(*model, sample, nuisance.eta, config.estimation);
        r.theta_hat = fit.theta;
        r.converged = fit.converged;
        r.boundary = fit.boundary;
        r.rank_deficient = fit.rank_deficient;

        const Eigen::MatrixXd scores = score_matrix(*model, sample, fit.theta, nuisance.eta);
        const auto var = cluster_variance(fit, scores, sample.shape(), config.variance);
        r.V = var.V;
        r.se = var.se;
        if (!r.se.allFinite())
            throw NumericalError("variance estimate has a negative or non-finite diagonal");
        const auto ci = confidence_interval(fit, var, config.level);
        const Eigen::VectorXd theta0 = true_theta(config);
        r.covered = true;
        for (std::size_t j = 0; j < ci.size(); ++j)
            r.covered = r.covered && ci[j].contains(theta0(static_cast<Eigen::Index>(j)));
    }
    catch (const std::exception& e)
    {
        r.failed = true;
        r.covered = false;
        r.error = e.what();
    }
    return r;
}

std::optional<OracleVariance> shape_oracle(const McConfig& config, const Shape& shape)
{
    if (!config.oracle.enabled)
        return std::nullopt;
    const DgpSpec spec = config.dgp.reshaped(shape);
    const auto model = make_model(config.model, spec.tau->fields());
    const auto truth = spec.tau->oracle_nuisance();
    NuisanceParam eta;
    for (const auto& n : model->nuisance_names())
    {
        if (!truth.has(n))
            return std::nullopt;
        eta.set(n, truth.get(n));
    }
    auto oracle = oracle_psi0(*model, spec, true_theta(config), eta, config.oracle.projection);
    // The two-step weighting converges to the inverse of Psi0.
    if (config.estimation.weighting.mode == WeightingMode::TwoStep && model->moments() > 1 && !oracle.degenerate)
    {
        const Eigen::MatrixXd psi = oracle.Psi0 + config.estimation.weighting.ridge *
                                                      Eigen::MatrixXd::Identity(model->moments(), model->moments());
        oracle.Upsilon = psi.inverse();
        oracle.V = oracle_V(oracle);
    }
    return oracle;
}

double ks_distance_normal(std::vector<double> z)
{
    if (z.empty())
        return kNaN;
    std::sort(z.begin(), z.end());
    const double m = static_cast<double>(z.size());
    double d = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i)
    {
        const double F = normal_cdf(z[i]);
        d = std::max({d, (static_cast<double>(i) + 1.0) / m - F, F - static_cast<double>(i) / m});
    }
    return d;
}

McResult run_monte_carlo(const McConfig& config, int threads)
{
    McResult result;
    const auto shapes = config.shapes.size();
    const auto R = static_cast<std::size_t>(config.replications);
    result.params = make_model(config.model, config.dgp.tau->fields())->params();
    result.records.resize(shapes * R);
    parallel_for(shapes * R, threads, [&](std::size_t i) {
        result.records[i] = run_replication(config, static_cast<int>(i / R), static_cast<int>(i % R));
    });

    std::vector<std::optional<OracleVariance>> oracles(shapes);
    std::vector<std::string> notes(shapes);
    parallel_for(shapes, threads, [&](std::size_t s) {
        try
        {
            oracles[s] = shape_oracle(config, config.shapes[s]);
        }
        catch (const std::exception& e)
        {
            notes[s] = e.what();
        }
    });
    for (std::size_t s = 0; s < shapes; ++s)
    {
        result.summaries.push_back(
            summarize(config, config.shapes[s], static_cast<int>(s), result.records, oracles[s], result.params));
        result.summaries.back().oracle_note = notes[s];
    }
    return result;
}

void write_replications_csv(const McResult& result, std::ostream& out)
{
    const int d = result.params;
    out << "shape_id,rep";
    for (int j = 1; j <= d; ++j)
        out << ",theta_hat_" << j;
    for (int j = 1; j <= d; ++j)
        out << ",se_" << j;
    out << ",covered,flags\n";
    for (const auto& r : result.records)
    {
        out << r.shape_id << ',' << r.rep;
        for (int j = 0; j < d; ++j)
            out << ',' << format_number(j < r.theta_hat.size() ? r.theta_hat(j) : kNaN);
        for (int j = 0; j < d; ++j)
            out << ',' << format_number(j < r.se.size() ? r.se(j) : kNaN);
        out << ',' << (r.covered ? 1 : 0) << ',' << r.flags() << '\n';
    }
}

void write_summary_json(const McConfig& config, const McResult& result, std::ostream& out)
{
    using ojson = nlohmann::ordered_json;
    const auto model = make_model(config.model, config.dgp.tau->fields());
    ojson root;
    root["model"] = config.model.name;
    root["learner"] = config.learner.name;
    if (config.learner.name == "lasso")
        root["lambda_rule"] = config.learner.lambda ? "fixed" : "cluster_quantile";
    root["nuisance_components"] = model->nuisance_names();
    root["variance"] = variance_name(config.variance);
    root["weighting"] = config.estimation.weighting.mode == WeightingMode::Identity ? "identity" : "two_step";
    if (config.estimation.weighting.mode == WeightingMode::TwoStep)
        root["initial_estimator"] = "identity_weighted";
    root["level"] = config.level;
    root["replications"] = config.replications;
    root["seed"] = config.seed;
    root["theta0"] = vector_json(true_theta(config));
    root["constants"] = {{"C1", config.constants.C1}, {"C2", config.constants.C2}, {"C4", config.constants.C4}};

    auto shapes = ojson::array();
    for (const auto& s : result.summaries)
    {
        ojson j;
        j["shape"] = s.shape.dims();
        j["replications"] = s.replications;
        j["used"] = s.used;
        j["discarded"] = {{"nonconvergence", s.discarded_nonconvergence},
                          {"boundary", s.discarded_boundary},
                          {"error", s.discarded_error}};
        j["bias"] = vector_json(s.bias);
        j["rmse"] = vector_json(s.rmse);
        j["mean_se"] = vector_json(s.mean_se);
        j["sd"] = vector_json(s.sd);
        j["coverage"] = s.coverage;
        j["coverage_se"] = s.coverage_se;
        j["ks"] = vector_json(s.ks);
        j["ks_standardization"] = s.ks_standardization;
        j["mean_V"] = matrix_json(s.mean_V);
        j["V_oracle"] = s.V_oracle ? matrix_json(*s.V_oracle) : ojson(nullptr);
        j["v_rel_error"] = s.v_rel_error;
        j["v_rel_error_mean"] = s.v_rel_error_mean;
        j["degenerate"] = s.degenerate;
        j["unbalanced"] = s.unbalanced;
        if (!s.mean_lambdas.empty())
            j["mean_lambda"] = s.mean_lambdas;
        if (!s.oracle_note.empty())
            j["oracle_note"] = s.oracle_note;
        shapes.push_back(std::move(j));
    }
    root["shapes"] = std::move(shapes);
    out << root.dump(2) << '\n';
}

void emit_reports(const McConfig& config, const McResult& result, const std::filesystem::path& dir)
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
    auto write = [&](const std::string& name, auto&& body) {
        const auto path = dir / name;
        std::ofstream out(path, std::ios::binary);
        if (!out)
            throw IoError("cannot open " + path.string() + " for writing");
        body(out);
        out.flush();
        if (!out)
            throw IoError("failed while writing " + path.string());
    };
    write(config.replications_file, [&](std::ostream& o) { write_replications_csv(result, o); });
    write(config.summary_file, [&](std::ostream& o) { write_summary_json(config, result, o); });
}

}  // namespace mwdml
