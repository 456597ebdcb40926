#include "mwdml/gmm.hpp"

#include <cmath>
#include <limits>

#include <boost/math/tools/toms748_solve.hpp>

#include "mwdml/variance.hpp"

namespace mwdml {
namespace {

bool has_box(const EstimationSpec& spec)
{
    return spec.lower.size() > 0 || spec.upper.size() > 0;
}

Eigen::VectorXd clamp_to_box(Eigen::VectorXd theta, const EstimationSpec& spec)
{
    for (Eigen::Index j = 0; j < theta.size(); ++j)
    {
        if (spec.lower.size() > j)
            theta(j) = std::max(theta(j), spec.lower(j));
        if (spec.upper.size() > j)
            theta(j) = std::min(theta(j), spec.upper(j));
    }
    return theta;
}

bool on_boundary(const Eigen::VectorXd& theta, const EstimationSpec& spec)
{
    for (Eigen::Index j = 0; j < theta.size(); ++j)
    {
        if (spec.lower.size() > j && theta(j) <= spec.lower(j) + 1e-10 * (1.0 + std::abs(spec.lower(j))))
            return true;
        if (spec.upper.size() > j && theta(j) >= spec.upper(j) - 1e-10 * (1.0 + std::abs(spec.upper(j))))
            return true;
    }
    return false;
}

struct State
{
    Eigen::VectorXd moment;
    Eigen::MatrixXd J;
    Eigen::VectorXd foc;
    double objective = 0.0;
    double rounding = 0.0;  // size of the FOC that rounding alone can produce
};

class Problem
{
  public:
    Problem(const MomentModel& model, const ClusteredSample& sample, const NuisanceParam& eta,
            const Eigen::MatrixXd& U)
        : model_(model), sample_(sample), eta_(eta), U_(U)
    {
    }

    double objective(const Eigen::VectorXd& theta) const
    {
        const Eigen::VectorXd m = empirical_moment(model_, sample_, theta, eta_);
        return m.dot(U_ * m);
    }

    State state(const Eigen::VectorXd& theta) const
    {
        State s;
        const Eigen::MatrixXd scores = score_matrix(model_, sample_, theta, eta_);
        s.moment = scores.colwise().mean().transpose();
        s.J = score_jacobian(model_, sample_, theta, eta_);
        s.foc = s.J.transpose() * U_ * s.moment;
        s.objective = s.moment.dot(U_ * s.moment);
        const double typical = scores.rowwise().norm().mean();
        s.rounding = 64.0 * std::numeric_limits<double>::epsilon() * (s.J.transpose() * U_).norm() * typical;
        return s;
    }

  private:
    const MomentModel& model_;
    const ClusteredSample& sample_;
    const NuisanceParam& eta_;
    const Eigen::MatrixXd& U_;
};

}  // namespace

Eigen::MatrixXd score_matrix(const MomentModel& model, const ClusteredSample& sample, const Eigen::VectorXd& theta,
                             const NuisanceParam& eta)
{
    Eigen::MatrixXd out(static_cast<Eigen::Index>(sample.cells()), model.moments());
    std::vector<std::size_t> bad;
    for (std::size_t c = 0; c < sample.cells(); ++c)
    {
        const Eigen::VectorXd s = evaluate_score(model, sample.record(c), theta, eta);
        if (s.size() != model.moments())
            throw DomainError("score has the wrong length for model " + model.name());
        if (!s.allFinite())
            bad.push_back(c);
        out.row(static_cast<Eigen::Index>(c)) = s.transpose();
    }
    if (!bad.empty())
    {
        // Build the message before bad is moved into the exception.
        const std::string what = "non-finite score in " + std::to_string(bad.size()) + " cell(s), first at cell " +
                                 std::to_string(bad.front());
        throw NonFiniteScore(what, std::move(bad));
    }
    return out;
}

Eigen::VectorXd empirical_moment(const MomentModel& model, const ClusteredSample& sample, const Eigen::VectorXd& theta,
                                 const NuisanceParam& eta)
{
    if (sample.cells() == 0)
        throw DomainError("empty sample");
    return score_matrix(model, sample, theta, eta).colwise().mean().transpose();
}

Eigen::MatrixXd weighting_matrix(const MomentModel& model, const ClusteredSample& sample,
                                 const Eigen::VectorXd& theta_init, const NuisanceParam& eta,
                                 const WeightingSpec& spec)
{
    if (!(spec.ridge >= 0.0))
        throw DomainError("ridge must be nonnegative");
    const int q = model.moments();
    if (spec.mode == WeightingMode::Identity)
        return Eigen::MatrixXd::Identity(q, q);

    const Eigen::MatrixXd scores = score_matrix(model, sample, theta_init, eta);
    Eigen::MatrixXd psi = psi_hat(scores, sample.shape()) + spec.ridge * Eigen::MatrixXd::Identity(q, q);
    psi = 0.5 * (psi + psi.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(psi);
    const double top = std::max(eig.eigenvalues().maxCoeff(), 0.0);
    const double bottom = eig.eigenvalues().minCoeff();
    if (!(bottom > 1e-14 * top) || !(top > 0.0))
        throw NumericalError("cluster-robust middle matrix is singular; raise the ridge");
    const Eigen::MatrixXd inv =
        eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
    return 0.5 * (inv + inv.transpose());
}

GmmFit solve_gmm_fixed(const MomentModel& model, const ClusteredSample& sample, const NuisanceParam& eta,
                       const Eigen::MatrixXd& Upsilon, const EstimationSpec& spec)
{
    const int d = model.params();
    if (spec.theta_start.size() != d)
        throw DomainError("theta start has the wrong dimension for model " + model.name());
    if (model.moments() < d)
        throw DomainError("model has fewer moments than parameters");
    if (Upsilon.rows() != model.moments() || Upsilon.cols() != model.moments())
        throw DomainError("weighting matrix has the wrong size");

    Problem problem(model, sample, eta, Upsilon);
    GmmFit fit;
    fit.Upsilon = Upsilon;
    Eigen::VectorXd theta = clamp_to_box(spec.theta_start, spec);
    State st = problem.state(theta);

    auto done = [&](const State& s) { return s.foc.norm() <= spec.tol || s.foc.norm() <= s.rounding; };

    while (!done(st) && fit.iterations < spec.max_iter)
    {
        ++fit.iterations;
        const Eigen::MatrixXd bread = st.J.transpose() * Upsilon * st.J;
        Eigen::FullPivLU<Eigen::MatrixXd> lu(bread);
        if (lu.rank() < d)
        {
            fit.rank_deficient = true;
            break;
        }
        const Eigen::VectorXd step = lu.solve(st.foc);
        double t = 1.0;
        bool accepted = false;
        for (int h = 0; h <= spec.max_halvings; ++h, t *= 0.5)
        {
            const Eigen::VectorXd cand = clamp_to_box(theta + t * step, spec);
            if (cand == theta)
                break;
            if (problem.objective(cand) <= st.objective)
            {
                theta = cand;
                accepted = true;
                break;
            }
        }
        if (!accepted)
            break;
        st = problem.state(theta);
    }

    if (!done(st) && d == 1)
    {
        // Bracket a sign change of the scalar first-order condition around theta.
        auto foc = [&](double x) {
            Eigen::VectorXd th(1);
            th(0) = x;
            return problem.state(th).foc(0);
        };
        const double lo_box = spec.lower.size() ? spec.lower(0) : -std::numeric_limits<double>::infinity();
        const double hi_box = spec.upper.size() ? spec.upper(0) : std::numeric_limits<double>::infinity();
        const double f0 = st.foc(0);
        double width = std::max(1.0, std::abs(theta(0))) * 1e-3;
        for (int expand = 0; expand < 60; ++expand, width *= 2.0)
        {
            double a = std::max(theta(0) - width, lo_box);
            double b = std::min(theta(0) + width, hi_box);
            double fa = foc(a), fb = foc(b);
            double left = a, right = b, fl = fa, fr = fb;
            if (fa * f0 <= 0.0)
            {
                right = theta(0);
                fr = f0;
            }
            else if (fb * f0 <= 0.0)
            {
                left = theta(0);
                fl = f0;
            }
            else
            {
                if (a == lo_box && b == hi_box)
                    break;
                continue;
            }
            std::uintmax_t iters = 200;
            auto root = boost::math::tools::toms748_solve(foc, left, right, fl, fr,
                                                          boost::math::tools::eps_tolerance<double>(52), iters);
            Eigen::VectorXd th(1);
            th(0) = 0.5 * (root.first + root.second);
            theta = th;
            st = problem.state(theta);
            fit.used_bracketing = true;
            fit.iterations += static_cast<int>(iters);
            break;
        }
    }

    fit.theta = theta;
    fit.J = st.J;
    fit.moment = st.moment;
    fit.foc_norm = st.foc.norm();
    fit.converged = done(st);
    fit.boundary = has_box(spec) && on_boundary(theta, spec);
    Eigen::FullPivLU<Eigen::MatrixXd> jlu(st.J);
    jlu.setThreshold(1e-10);
    fit.rank_deficient = fit.rank_deficient || jlu.rank() < d;
    return fit;
}

GmmFit solve_gmm(const MomentModel& model, const ClusteredSample& sample, const NuisanceParam& eta,
                 const EstimationSpec& spec)
{
    const int q = model.moments();
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(q, q);
    if (spec.weighting.mode == WeightingMode::Identity)
        return solve_gmm_fixed(model, sample, eta, I, spec);

    Eigen::VectorXd theta_init;
    if (spec.weighting.theta_init)
        theta_init = *spec.weighting.theta_init;
    else
        theta_init = solve_gmm_fixed(model, sample, eta, I, spec).theta;
    const Eigen::MatrixXd U = weighting_matrix(model, sample, theta_init, eta, spec.weighting);
    EstimationSpec second = spec;
    second.theta_start = theta_init;
    auto fit = solve_gmm_fixed(model, sample, eta, U, second);
    fit.theta_initial = theta_init;
    return fit;
}

}  // namespace mwdml
