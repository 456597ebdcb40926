#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "mwdml/projection.hpp"

namespace mwdml {

/// Finite family of scalar functions with a pointwise envelope and optional
/// VC characteristics (A, v).
struct FunctionGrid
{
    std::vector<ScalarFn> functions;
    ScalarFn envelope;
    std::optional<double> vc_A;
    std::optional<double> vc_v;
    std::vector<std::string> labels;
    /// Set by center_grid; the sup-process simulation requires it.
    bool centered = false;
    std::vector<double> means;

    std::size_t size() const { return functions.size(); }
    /// Largest |f(x)| - F(x) over the grid at x; positive means the envelope is violated.
    double envelope_excess(Record x) const;
};

/// Indicators 1{x[field] <= t} with envelope 1.
FunctionGrid threshold_grid(int field, const std::vector<double>& thresholds);
/// A single function with the given envelope.
FunctionGrid singleton_grid(ScalarFn f, ScalarFn envelope, std::string label = "f");

/// Subtracts P f from every member. The envelope becomes F + max_f |P f| so it
/// still dominates the centered functions.
FunctionGrid center_grid(const FunctionGrid& grid, const DgpSpec& spec, ProjectionOptions options = {});

/// Upper VC bound on the uniform entropy integral,
/// int_0^delta (1 + v log(A / tau))^{k/2} d tau, by tanh-sinh quadrature.
double entropy_integral_vc(double A, double v, int k, double delta);

/// Lower bounds on A from the two competing forms of the VC threshold:
/// e^{2(K-1)/16} v e and (e^{2(K-1)}/16) v e.
struct VcThresholds
{
    double exponent_form = 0.0;
    double quotient_form = 0.0;
    double weaker() const { return exponent_form < quotient_form ? exponent_form : quotient_form; }
};
VcThresholds vc_thresholds(int order);

struct SupEstimate
{
    double mean = 0.0;  // |I_{N,e}|^{1/2} E sup_f |H_N^e(f)|
    double se = 0.0;    // Monte Carlo standard error
    std::vector<double> draws;
};

/// Monte Carlo estimate of |I_{N,e}|^{1/2} E sup_f |H_N^e(f)| over `replications`
/// independent samples of spec. The grid must be centered.
SupEstimate empirical_sup_process(const FunctionGrid& grid, const DgpSpec& spec, Mask e, int replications,
                                  std::uint64_t seed, ProjectionOptions options = {}, int threads = 1);

struct BoundOptions
{
    std::vector<int> n_grid{10, 20, 40, 80};
    int replications = 300;
    double q = 4.0;                 // moment order for the global bound
    int diagonal_draws = 200;       // samples of the diagonal maximum M_e
    ProjectionOptions projection;   // exact by default
    std::uint64_t seed = 0;
    int threads = 1;
};

struct BoundPoint
{
    Mask mask;
    int n = 0;
    double lhs = 0.0;
    double lhs_se = 0.0;
    double rhs_global = 0.0;
    double rhs_local = 0.0;
    double ratio = 0.0;  // lhs / rhs_local
    double sigma = 0.0;
    double projected_envelope = 0.0;  // ||P_e F||_{P,2}
    double diagonal_max = 0.0;        // ||M_e||_{P,2}
};

struct BoundTrend
{
    Mask mask;
    double lhs_slope = 0.0;      // log-log slope of lhs against n
    double lhs_slope_se = 0.0;
    double ratio_slope = 0.0;    // log-log slope of lhs / rhs_local against n
    double ratio_slope_se = 0.0;
    double global_ratio_slope = 0.0;  // same for lhs / rhs_global
    double global_ratio_slope_se = 0.0;
    double max_over_median = 0.0;         // of lhs / rhs_local
    double global_max_over_median = 0.0;  // of lhs / rhs_global
    bool degenerate = false;     // every lhs <= 1e-8
    bool non_increasing = false; // global ratio slope <= 2 standard errors
    bool bounded = false;        // max / median <= 2 for both ratios

    bool ok() const { return degenerate || (non_increasing && bounded); }
};

struct BoundReport
{
    std::vector<BoundPoint> points;
    std::vector<BoundTrend> trends;
    int order = 0;  // K, for printing masks
    double A = 0.0;
    double v = 0.0;
    double q = 0.0;
    VcThresholds thresholds;
    double envelope_norm = 0.0;  // ||F||_{P, q v 2}

    bool ok() const;
};

/// Square shapes (n, ..., n) for every n on the grid, every mask: simulated
/// left side against the global bound J_e(1) ||F||_{P,q v 2} and the local VC
/// bound sigma_e (v log(max(A, Nbar)))^{k/2} + n^{-1/2} ||M_e||_{P,2} (v log(max(A, Nbar)))^k.
BoundReport bound_check(const FunctionGrid& grid, const DgpSpec& spec, const std::vector<Mask>& masks,
                        const BoundOptions& options);

/// CSV with columns mask, n, lhs, lhs_se, rhs_global, rhs_local, ratio.
void write_bound_csv(const BoundReport& report, std::ostream& out);

}  // namespace mwdml
