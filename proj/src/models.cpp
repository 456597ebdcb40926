#include "mwdml/models.hpp"

#include <cmath>

#include "mwdml/error.hpp"

namespace mwdml {
namespace {

double field(Record x, int j)
{
    return x[static_cast<std::size_t>(j)];
}

Eigen::VectorXd scalar(double v)
{
    return Eigen::VectorXd::Constant(1, v);
}

Eigen::MatrixXd scalar_matrix(double v)
{
    return Eigen::MatrixXd::Constant(1, 1, v);
}

}  // namespace

std::optional<Eigen::MatrixXd> MomentModel::score_derivative(Record, const Eigen::VectorXd&,
                                                             const NuisanceParam&) const
{
    return std::nullopt;
}

Eigen::VectorXd LocationModel::score(Record x, const Eigen::VectorXd& theta, const NuisanceParam&) const
{
    return scalar(field(x, y_) - theta(0));
}

std::optional<Eigen::MatrixXd> LocationModel::score_derivative(Record, const Eigen::VectorXd&,
                                                               const NuisanceParam&) const
{
    return scalar_matrix(-1.0);
}

IvModel::IvModel(int y, int d, std::vector<int> z) : y_(y), d_(d), z_(std::move(z))
{
    if (z_.empty())
        throw DomainError("iv model needs at least one instrument");
}

Eigen::VectorXd IvModel::score(Record x, const Eigen::VectorXd& theta, const NuisanceParam&) const
{
    const double resid = field(x, y_) - theta(0) * field(x, d_);
    Eigen::VectorXd out(static_cast<Eigen::Index>(z_.size()));
    for (std::size_t j = 0; j < z_.size(); ++j)
        out(static_cast<Eigen::Index>(j)) = resid * field(x, z_[j]);
    return out;
}

std::optional<Eigen::MatrixXd> IvModel::score_derivative(Record x, const Eigen::VectorXd&, const NuisanceParam&) const
{
    Eigen::MatrixXd out(static_cast<Eigen::Index>(z_.size()), 1);
    for (std::size_t j = 0; j < z_.size(); ++j)
        out(static_cast<Eigen::Index>(j), 0) = -field(x, d_) * field(x, z_[j]);
    return out;
}

Eigen::VectorXd PlrModel::score(Record x, const Eigen::VectorXd& theta, const NuisanceParam& eta) const
{
    const double dres = field(x, d_) - eta("m", x);
    return scalar((field(x, y_) - eta("l", x) - theta(0) * dres) * dres);
}

std::optional<Eigen::MatrixXd> PlrModel::score_derivative(Record x, const Eigen::VectorXd&,
                                                          const NuisanceParam& eta) const
{
    const double dres = field(x, d_) - eta("m", x);
    return scalar_matrix(-dres * dres);
}

Eigen::VectorXd NonOrthogonalPlrModel::score(Record x, const Eigen::VectorXd& theta, const NuisanceParam& eta) const
{
    const double d = field(x, d_);
    return scalar((field(x, y_) - theta(0) * d - eta("g", x)) * d);
}

std::optional<Eigen::MatrixXd> NonOrthogonalPlrModel::score_derivative(Record x, const Eigen::VectorXd&,
                                                                       const NuisanceParam&) const
{
    const double d = field(x, d_);
    return scalar_matrix(-d * d);
}

//---------------------------------------------------------------------------//

Eigen::VectorXd evaluate_score(const MomentModel& model, Record x, const Eigen::VectorXd& theta,
                               const NuisanceParam& eta)
{
    if (theta.size() != model.params())
        throw DomainError("theta has the wrong dimension for model " + model.name());
    return model.score(x, theta, eta);
}

Eigen::MatrixXd score_derivative(const MomentModel& model, Record x, const Eigen::VectorXd& theta,
                                 const NuisanceParam& eta, JacobianMethod method)
{
    if (method != JacobianMethod::FiniteDifference)
    {
        if (auto analytic = model.score_derivative(x, theta, eta))
            return *analytic;
        if (method == JacobianMethod::Analytic)
            throw DomainError("model " + model.name() + " has no analytic derivative");
    }
    Eigen::MatrixXd out(model.moments(), model.params());
    for (int j = 0; j < model.params(); ++j)
    {
        const double h = 1e-5 * std::max(1.0, std::abs(theta(j)));
        Eigen::VectorXd up = theta, down = theta;
        up(j) += h;
        down(j) -= h;
        const double span = up(j) - down(j);
        if (!(span > 0.0))
            throw NumericalError("finite-difference step underflow");
        out.col(j) = (model.score(x, up, eta) - model.score(x, down, eta)) / span;
    }
    return out;
}

Eigen::MatrixXd score_jacobian(const MomentModel& model, const ClusteredSample& sample, const Eigen::VectorXd& theta,
                               const NuisanceParam& eta, JacobianMethod method)
{
    if (sample.cells() == 0)
        throw DomainError("empty sample");
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(model.moments(), model.params());
    for (std::size_t c = 0; c < sample.cells(); ++c)
        sum += score_derivative(model, sample.record(c), theta, eta, method);
    return -sum / static_cast<double>(sample.cells());
}

double nuisance_distance(const NuisanceParam& a, const NuisanceParam& b, const ClusteredSample& sample,
                         const std::vector<std::string>& names)
{
    if (names.empty() || sample.cells() == 0)
        return 0.0;
    double ss = 0.0;
    for (const auto& name : names)
        for (std::size_t c = 0; c < sample.cells(); ++c)
        {
            const double diff = a(name, sample.record(c)) - b(name, sample.record(c));
            ss += diff * diff;
        }
    return std::sqrt(ss / static_cast<double>(names.size() * sample.cells()));
}

//---------------------------------------------------------------------------//

NuisanceParam normalize_direction(const NuisanceParam& direction, const DgpSpec& spec, ProjectionOptions options)
{
    NuisanceParam out;
    for (const auto& name : direction.names())
    {
        const auto& fn = direction.get(name);
        const double ms =
            population_expectation(spec, [&](Record x) { return scalar(fn(x) * fn(x)); }, options)(0);
        if (ms > 0.0)
        {
            const double s = 1.0 / std::sqrt(ms);
            out.set(name, [fn, s](Record x) { return s * fn(x); });
        }
        else
            out.set(name, fn);
    }
    return out;
}

OrthogonalityReport orthogonality_check(const MomentModel& model, const DgpSpec& spec, const Eigen::VectorXd& theta0,
                                        const NuisanceParam& eta0, const std::vector<NuisanceParam>& directions,
                                        const std::vector<double>& steps, ProjectionOptions options)
{
    if (steps.empty())
        throw DomainError("orthogonality check needs at least one step");
    for (std::size_t i = 0; i < steps.size(); ++i)
        if (!(steps[i] > 0.0) || (i > 0 && !(steps[i] < steps[i - 1])))
            throw DomainError("steps must be positive and strictly decreasing");

    auto moment_at = [&](const NuisanceParam& dir, double tau) {
        const auto eta = eta0.perturbed(dir, tau);
        return population_expectation(
            spec, [&](Record x) { return evaluate_score(model, x, theta0, eta); }, options);
    };

    OrthogonalityReport report;
    for (const auto& dir : directions)
    {
        std::vector<Eigen::VectorXd> central;
        for (double h : steps)
            central.push_back((moment_at(dir, h) - moment_at(dir, -h)) / (2.0 * h));

        std::vector<Eigen::VectorXd> extrapolated;
        for (std::size_t i = 0; i + 1 < steps.size(); ++i)
        {
            const double r2 = (steps[i] / steps[i + 1]) * (steps[i] / steps[i + 1]);
            extrapolated.push_back((r2 * central[i + 1] - central[i]) / (r2 - 1.0));
        }
        Eigen::VectorXd estimate = extrapolated.empty() ? central.back() : extrapolated.back();
        if (extrapolated.size() >= 2)
        {
            const double change = (extrapolated.back() - extrapolated[extrapolated.size() - 2]).cwiseAbs().maxCoeff();
            if (!(change <= 1e-6 + 1e-3 * estimate.cwiseAbs().maxCoeff()))
                throw NumericalError("Richardson extrapolation did not settle");
        }
        Eigen::Index at = 0;
        estimate.cwiseAbs().maxCoeff(&at);
        report.derivatives.push_back(estimate(at));
        report.max_abs = std::max(report.max_abs, std::abs(estimate(at)));
    }
    return report;
}

//---------------------------------------------------------------------------//

Eigen::MatrixXd sandwich(const Eigen::MatrixXd& J, const Eigen::MatrixXd& Upsilon, const Eigen::MatrixXd& Psi)
{
    if (Upsilon.rows() != J.rows() || Upsilon.cols() != J.rows() || Psi.rows() != J.rows() || Psi.cols() != J.rows())
        throw DomainError("sandwich pieces have mismatched dimensions");
    const Eigen::MatrixXd bread = J.transpose() * Upsilon * J;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(bread);
    lu.setThreshold(1e-12);
    if (lu.rank() < J.cols())
        throw NumericalError("Jacobian is rank deficient");
    const Eigen::MatrixXd inv = lu.inverse();
    const Eigen::MatrixXd meat = J.transpose() * Upsilon * Psi * Upsilon * J;
    const Eigen::MatrixXd V = inv * meat * inv.transpose();
    return 0.5 * (V + V.transpose());
}

Eigen::MatrixXd oracle_V(const OracleVariance& oracle)
{
    return sandwich(oracle.J0, oracle.Upsilon, oracle.Psi0);
}

OracleVariance oracle_psi0(const MomentModel& model, const DgpSpec& spec, const Eigen::VectorXd& theta0,
                           const NuisanceParam& eta0, ProjectionOptions options,
                           std::optional<Eigen::MatrixXd> upsilon)
{
    const int q = model.moments();
    const int d = model.params();
    const auto& shape = spec.shape;
    auto psi = [&](Record x) { return evaluate_score(model, x, theta0, eta0); };

    OracleVariance out;
    out.dimension_terms = dimension_covariances(spec, psi, options);
    out.Psi0 = Eigen::MatrixXd::Zero(q, q);
    for (int k = 0; k < shape.order(); ++k)
    {
        const double mu = static_cast<double>(shape.min_dim()) / shape.dim(k);
        out.mu.push_back(mu);
        auto& term = out.dimension_terms[static_cast<std::size_t>(k)];
        term = 0.5 * (term + term.transpose());
        out.Psi0 += mu * term;
    }

    const Eigen::VectorXd second = population_expectation(
        spec,
        [&](Record x) {
            const Eigen::VectorXd s = psi(x);
            return Eigen::VectorXd(s.cwiseProduct(s));
        },
        options);
    const double scale = std::max(second.sum(), std::numeric_limits<double>::min());
    const double tol = options.mode == ProjectionMode::Exact ? 1e-10 : 5.0 / std::sqrt(static_cast<double>(options.draws));
    out.degenerate = true;
    for (const auto& term : out.dimension_terms)
        if (term.trace() > tol * scale)
            out.degenerate = false;

    const Eigen::VectorXd jac = population_expectation(
        spec,
        [&](Record x) {
            const Eigen::MatrixXd D = score_derivative(model, x, theta0, eta0);
            return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(D.data(), D.size()));
        },
        options);
    out.J0 = -Eigen::Map<const Eigen::MatrixXd>(jac.data(), q, d);
    out.Upsilon = upsilon ? *upsilon : Eigen::MatrixXd::Identity(q, q);
    try
    {
        out.V = oracle_V(out);
    }
    catch (const NumericalError&)
    {
        out.V.resize(0, 0);
    }
    return out;
}

}  // namespace mwdml
