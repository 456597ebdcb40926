#include "mwdml/learners.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>

#include <boost/math/distributions/normal.hpp>

#include "mwdml/error.hpp"
#include "mwdml/variance.hpp"

namespace mwdml {
namespace {

double soft_threshold(double z, double lambda)
{
    if (z > lambda)
        return z - lambda;
    if (z < -lambda)
        return z + lambda;
    return 0.0;
}

double sigmoid(double t)
{
    return t >= 0.0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t));
}

/// log(1 + e^t) without overflow.
double softplus(double t)
{
    return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

struct Standardized
{
    Eigen::MatrixXd Z;
    Eigen::VectorXd mean, sd;  // sd 0 marks a constant column
};

Standardized standardize(const Eigen::MatrixXd& X)
{
    Standardized s;
    const double N = static_cast<double>(X.rows());
    s.mean = X.colwise().mean().transpose();
    s.Z = X.rowwise() - s.mean.transpose();
    s.sd.resize(X.cols());
    for (Eigen::Index j = 0; j < X.cols(); ++j)
    {
        const double sd = std::sqrt(s.Z.col(j).squaredNorm() / N);
        s.sd(j) = sd > 1e-12 * (1.0 + std::abs(s.mean(j))) ? sd : 0.0;
        if (s.sd(j) > 0.0)
            s.Z.col(j) /= s.sd(j);
        else
            s.Z.col(j).setZero();
    }
    return s;
}

void check_inputs(const Eigen::MatrixXd& X, const Eigen::VectorXd& y)
{
    if (X.rows() != y.size() || X.rows() == 0)
        throw DomainError("features and targets must have the same positive number of rows");
    if (!X.allFinite() || !y.allFinite())
        throw DomainError("learner inputs must be finite");
}

}  // namespace

double LassoFit::predict_one(const Eigen::Ref<const Eigen::RowVectorXd>& row) const
{
    const double eta = linear(row);
    return link == Link::Logistic ? sigmoid(eta) : eta;
}

Eigen::VectorXd LassoFit::predict(const Eigen::MatrixXd& X) const
{
    Eigen::VectorXd out(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        out(i) = predict_one(X.row(i));
    return out;
}

LassoFit fit_lasso(const LassoSpec& spec, const Eigen::MatrixXd& X, const Eigen::VectorXd& y)
{
    check_inputs(X, y);
    if (!(spec.lambda >= 0.0))
        throw DomainError("lasso penalty must be nonnegative");
    if (spec.max_iter < 1 || !(spec.tol > 0.0))
        throw DomainError("lasso needs a positive iteration cap and tolerance");
    if (spec.link == Link::Logistic)
        for (Eigen::Index i = 0; i < y.size(); ++i)
            if (y(i) < 0.0 || y(i) > 1.0)
                throw DomainError("logistic lasso targets must lie in [0, 1]");

    const auto st = standardize(X);
    const Eigen::Index p = X.cols();
    const double N = static_cast<double>(X.rows());
    Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
    double b0 = 0.0;
    Eigen::VectorXd eta;

    LassoFit fit;
    fit.link = spec.link;
    fit.lambda = spec.lambda;

    if (spec.link == Link::Identity)
    {
        b0 = y.mean();
        Eigen::VectorXd r = y.array() - b0;
        auto objective = [&] { return 0.5 * r.squaredNorm() / N + spec.lambda * b.lpNorm<1>(); };
        while (fit.iterations < spec.max_iter)
        {
            ++fit.iterations;
            double change = 0.0;
            for (Eigen::Index j = 0; j < p; ++j)
            {
                if (st.sd(j) == 0.0)
                    continue;
                const double old = b(j);
                const double z = st.Z.col(j).dot(r) / N + old;
                b(j) = soft_threshold(z, spec.lambda);
                if (b(j) != old)
                {
                    r -= (b(j) - old) * st.Z.col(j);
                    change = std::max(change, std::abs(b(j) - old));
                }
            }
            fit.objective.push_back(objective());
            if (change < spec.tol)
            {
                fit.converged = true;
                break;
            }
        }
    }
    else
    {
        // Majorize the logistic loss coordinatewise with curvature 1/4.
        constexpr double w = 0.25;
        const double ybar = std::clamp(y.mean(), 1e-6, 1.0 - 1e-6);
        b0 = std::log(ybar / (1.0 - ybar));
        eta = Eigen::VectorXd::Constant(y.size(), b0);
        auto objective = [&] {
            double loss = 0.0;
            for (Eigen::Index i = 0; i < y.size(); ++i)
                loss += softplus(eta(i)) - y(i) * eta(i);
            return loss / N + spec.lambda * b.lpNorm<1>();
        };
        auto gradient = [&](const Eigen::VectorXd& col) {
            double g = 0.0;
            for (Eigen::Index i = 0; i < y.size(); ++i)
                g += (sigmoid(eta(i)) - y(i)) * col(i);
            return g / N;
        };
        const Eigen::VectorXd ones = Eigen::VectorXd::Ones(y.size());
        while (fit.iterations < spec.max_iter)
        {
            ++fit.iterations;
            double change = 0.0;
            const double step0 = -gradient(ones) / w;
            b0 += step0;
            eta.array() += step0;
            change = std::abs(step0);
            for (Eigen::Index j = 0; j < p; ++j)
            {
                if (st.sd(j) == 0.0)
                    continue;
                const double old = b(j);
                b(j) = soft_threshold(w * old - gradient(st.Z.col(j)), spec.lambda) / w;
                if (b(j) != old)
                {
                    eta += (b(j) - old) * st.Z.col(j);
                    change = std::max(change, std::abs(b(j) - old));
                }
            }
            fit.objective.push_back(objective());
            if (change < spec.tol)
            {
                fit.converged = true;
                break;
            }
        }
    }

    fit.beta = Eigen::VectorXd::Zero(p);
    fit.intercept = b0;
    for (Eigen::Index j = 0; j < p; ++j)
        if (st.sd(j) > 0.0)
        {
            fit.beta(j) = b(j) / st.sd(j);
            fit.intercept -= fit.beta(j) * st.mean(j);
        }
    return fit;
}

double lasso_penalty_rule(const Eigen::MatrixXd& X, const Eigen::VectorXd& residual, const Shape& shape)
{
    check_inputs(X, residual);
    if (static_cast<std::size_t>(X.rows()) != shape.cells())
        throw DomainError("penalty rule needs one row per cell");
    const auto st = standardize(X);
    const Eigen::MatrixXd scores = st.Z.array().colwise() * residual.array();
    const Eigen::MatrixXd psi = psi_hat(scores, shape);
    double sd = 0.0;
    for (Eigen::Index j = 0; j < psi.rows(); ++j)
        sd = std::max(sd, std::sqrt(std::max(psi(j, j), 0.0) / shape.min_dim()));
    const double level = 1.0 - 1.0 / std::max(2, shape.max_dim());
    return boost::math::quantile(boost::math::normal_distribution<double>(), level) * sd;
}

namespace {
constexpr int kPenaltyPasses = 15;
}

LassoFit fit_lasso_default(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Shape& shape, Link link)
{
    LassoSpec spec;
    spec.link = link;
    spec.lambda = lasso_penalty_rule(X, y.array() - y.mean(), shape);
    LassoFit fit = fit_lasso(spec, X, y);
    for (int pass = 1; pass < kPenaltyPasses; ++pass)
    {
        const double next = lasso_penalty_rule(X, y - fit.predict(X), shape);
        const bool settled = std::abs(next - spec.lambda) <= 1e-3 * spec.lambda;
        spec.lambda = next;
        fit = fit_lasso(spec, X, y);
        if (settled)
            break;
    }
    return fit;
}

//---------------------------------------------------------------------------//

int RegressionTree::leaves() const
{
    int count = 0;
    for (const auto& node : nodes)
        count += node.feature < 0;
    return count;
}

double RegressionTree::predict_one(const Eigen::Ref<const Eigen::RowVectorXd>& row) const
{
    if (nodes.empty())
        throw DomainError("tree has not been fitted");
    int at = 0;
    while (nodes[static_cast<std::size_t>(at)].feature >= 0)
    {
        const auto& node = nodes[static_cast<std::size_t>(at)];
        at = row(node.feature) <= node.threshold ? node.left : node.right;
    }
    return nodes[static_cast<std::size_t>(at)].value;
}

Eigen::VectorXd RegressionTree::predict(const Eigen::MatrixXd& X) const
{
    Eigen::VectorXd out(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        out(i) = predict_one(X.row(i));
    return out;
}

namespace {

struct Split
{
    double gain = 0.0;
    int feature = -1;
    double threshold = 0.0;
};

Split best_split(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const std::vector<Eigen::Index>& rows,
                 int min_leaf)
{
    Split best;
    const auto m = rows.size();
    if (m < 2 * static_cast<std::size_t>(min_leaf))
        return best;
    double total = 0.0, total_sq = 0.0;
    for (auto i : rows)
    {
        total += y(i);
        total_sq += y(i) * y(i);
    }
    const double parent_sse = total_sq - total * total / static_cast<double>(m);
    const double min_gain = 1e-12 * (1.0 + std::abs(parent_sse));

    std::vector<Eigen::Index> order(rows);
    for (Eigen::Index j = 0; j < X.cols(); ++j)
    {
        std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return X(a, j) < X(b, j); });
        double left = 0.0, left_sq = 0.0;
        for (std::size_t s = 0; s + 1 < m; ++s)
        {
            const double v = y(order[s]);
            left += v;
            left_sq += v * v;
            const auto nl = s + 1;
            const auto nr = m - nl;
            if (nl < static_cast<std::size_t>(min_leaf) || nr < static_cast<std::size_t>(min_leaf))
                continue;
            const double xa = X(order[s], j), xb = X(order[s + 1], j);
            if (!(xa < xb))
                continue;
            const double right = total - left, right_sq = total_sq - left_sq;
            const double sse = (left_sq - left * left / static_cast<double>(nl)) +
                               (right_sq - right * right / static_cast<double>(nr));
            const double gain = parent_sse - sse;
            if (gain > min_gain && gain > best.gain)
                best = {gain, static_cast<int>(j), 0.5 * (xa + xb)};
        }
    }
    return best;
}

}  // namespace

RegressionTree fit_tree(const TreeSpec& spec, const Eigen::MatrixXd& X, const Eigen::VectorXd& y)
{
    check_inputs(X, y);
    if (spec.max_leaves < 1 || spec.min_leaf < 1)
        throw DomainError("tree needs at least one leaf and a positive minimum leaf size");

    RegressionTree tree;
    std::vector<std::vector<Eigen::Index>> members;
    auto make_leaf = [&](std::vector<Eigen::Index> rows) {
        RegressionTree::Node node;
        double s = 0.0;
        for (auto i : rows)
            s += y(i);
        node.count = rows.size();
        node.value = s / static_cast<double>(rows.size());
        tree.nodes.push_back(node);
        members.push_back(std::move(rows));
        return static_cast<int>(tree.nodes.size() - 1);
    };

    std::vector<Eigen::Index> all(static_cast<std::size_t>(X.rows()));
    std::iota(all.begin(), all.end(), Eigen::Index{0});
    make_leaf(std::move(all));

    // Candidates ordered by gain; ties go to the earlier node.
    auto cmp = [](const std::pair<Split, int>& a, const std::pair<Split, int>& b) {
        return a.first.gain < b.first.gain || (a.first.gain == b.first.gain && a.second > b.second);
    };
    std::priority_queue<std::pair<Split, int>, std::vector<std::pair<Split, int>>, decltype(cmp)> queue(cmp);
    auto consider = [&](int node) {
        auto split = best_split(X, y, members[static_cast<std::size_t>(node)], spec.min_leaf);
        if (split.feature >= 0)
            queue.push({split, node});
    };
    consider(0);

    int leaves = 1;
    while (leaves < spec.max_leaves && !queue.empty())
    {
        const auto [split, node] = queue.top();
        queue.pop();
        std::vector<Eigen::Index> left, right;
        for (auto i : members[static_cast<std::size_t>(node)])
            (X(i, split.feature) <= split.threshold ? left : right).push_back(i);
        const int l = make_leaf(std::move(left));
        const int r = make_leaf(std::move(right));
        auto& parent = tree.nodes[static_cast<std::size_t>(node)];
        parent.feature = split.feature;
        parent.threshold = split.threshold;
        parent.left = l;
        parent.right = r;
        members[static_cast<std::size_t>(node)].clear();
        ++leaves;
        consider(l);
        consider(r);
    }
    return tree;
}

//---------------------------------------------------------------------------//

LearnerClass parse_learner_class(const std::string& name)
{
    if (name == "glm")
        return LearnerClass::Glm;
    if (name == "tree")
        return LearnerClass::Tree;
    if (name == "dnn")
        return LearnerClass::Dnn;
    throw DomainError("unknown learner class '" + name + "'");
}

VcCharacteristics vc_characteristics(LearnerClass cls, const VcParams& params)
{
    auto positive = [](double v, const char* what) {
        if (!(v > 0.0))
            throw DomainError(std::string("parameter ") + what + " must be positive");
    };
    positive(params.C, "C");
    if (params.K < 1)
        throw DomainError("parameter K must be at least 1");
    const double e = std::exp(1.0);
    const double floor = std::max(std::exp(2.0 * (params.K - 1) / 16.0), e);

    VcCharacteristics out;
    switch (cls)
    {
    case LearnerClass::Glm:
        positive(params.s, "s");
        positive(params.p, "p");
        out.v = params.s;
        out.A = params.C * e * params.p / params.s;
        break;
    case LearnerClass::Tree:
        positive(params.L, "L");
        positive(params.p, "p");
        out.v = 2.0 * params.C * params.L * std::log(2.0 * params.L * params.p);
        out.A = params.C;
        break;
    case LearnerClass::Dnn:
        positive(params.L, "L");
        positive(params.W, "W");
        positive(params.p, "p");
        positive(params.U, "U");
        out.v = 2.0 * params.C * params.L * params.W * std::log(params.p * params.U);
        out.A = params.C;
        break;
    }
    out.A = std::max(out.A, floor);
    return out;
}

RateResult rho_rate(const RateInputs& in)
{
    const double e = std::exp(1.0);
    if (!(in.A >= e * (1.0 - 1e-12)))
        throw DomainError("A must be at least e");
    if (!(in.v >= 1.0))
        throw DomainError("v must be at least 1");
    if (!(in.q > 2.0))
        throw DomainError("moment order q must exceed 2");
    if (in.k < 1 || in.k > in.K)
        throw DomainError("interaction order must satisfy 1 <= k <= K");
    if (!(in.n >= 1.0) || !(in.Nbar >= 1.0))
        throw DomainError("sizes n and Nbar must be at least 1");
    if (!(in.envelope_norm >= 0.0))
        throw DomainError("envelope norm must be nonnegative");

    const double L = in.v * std::log(std::max(in.A, in.Nbar));
    RateResult out;
    out.variance_branch = std::pow(L / in.n, 0.5 * in.k);
    out.envelope_branch = std::pow(in.envelope_norm * L / std::pow(in.n, 0.5 - 1.0 / in.q), in.k);
    out.rho = std::max(out.variance_branch, out.envelope_branch);
    return out;
}

}  // namespace mwdml
