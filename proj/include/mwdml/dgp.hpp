#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "mwdml/latent.hpp"
#include "mwdml/lattice.hpp"
#include "mwdml/nuisance.hpp"

namespace mwdml {

/// Latent values at one cell: factors[e.bits()] = U_{i.e}.
struct LatentCell
{
    std::vector<std::span<const double>> factors;

    std::span<const double> operator[](Mask e) const { return factors[e.bits()]; }
};

/// The composition map tau taking the 2^K - 1 latent values at a cell to an
/// observation record. Implementations must be deterministic and stateless.
class Composer
{
  public:
    virtual ~Composer() = default;

    virtual std::string name() const = 0;
    virtual const std::vector<std::string>& fields() const = 0;
    /// Smallest latent width the map reads for mask e.
    virtual int required_width(Mask e) const = 0;
    virtual void compose(const LatentCell& cell, std::span<double> record) const = 0;

    /// Structural parameter the DGP is built around, if it has one.
    virtual std::optional<std::vector<double>> theta0() const { return std::nullopt; }
    /// True nuisance functions, when known in closed form.
    virtual NuisanceParam oracle_nuisance() const { return {}; }
};

/// y = offset + sum_e weight_e * U_e[0].
class AdditiveComposer final : public Composer
{
  public:
    AdditiveComposer(int order, double offset, std::vector<double> weights_by_mask);

    std::string name() const override { return "additive"; }
    const std::vector<std::string>& fields() const override { return fields_; }
    int required_width(Mask) const override { return 1; }
    void compose(const LatentCell& cell, std::span<double> record) const override;
    std::optional<std::vector<double>> theta0() const override { return std::vector<double>{offset_}; }

  private:
    std::vector<std::string> fields_{"y"};
    double offset_;
    std::vector<double> weights_;
};

/// y = prod_{e in factors} U_e[0] + sum_{e in added} U_e[0].
class ProductComposer final : public Composer
{
  public:
    ProductComposer(std::vector<Mask> factors, std::vector<Mask> added);

    std::string name() const override { return "product"; }
    const std::vector<std::string>& fields() const override { return fields_; }
    int required_width(Mask) const override { return 1; }
    void compose(const LatentCell& cell, std::span<double> record) const override;

  private:
    std::vector<std::string> fields_{"y"};
    std::vector<Mask> factors_;
    std::vector<Mask> added_;
};

/// Partially linear regression. Every factor carries p covariate components
/// followed by an outcome-noise and a treatment-noise component:
///   x = sum_e U_e[0..p), eps = sum_e U_e[p], v = sum_e U_e[p+1],
///   d = gamma'x + v,  y = theta0 d + delta'x + eps.
/// With independent mean-zero components, m0(x) = gamma'x and
/// l0(x) = (theta0 gamma + delta)'x.
class PlrComposer final : public Composer
{
  public:
    PlrComposer(int order, double theta0, std::vector<double> gamma, std::vector<double> delta);

    std::string name() const override { return "plr"; }
    const std::vector<std::string>& fields() const override { return fields_; }
    int required_width(Mask) const override { return static_cast<int>(gamma_.size()) + 2; }
    void compose(const LatentCell& cell, std::span<double> record) const override;
    std::optional<std::vector<double>> theta0() const override { return std::vector<double>{theta0_}; }
    NuisanceParam oracle_nuisance() const override;

    int covariates() const { return static_cast<int>(gamma_.size()); }

  private:
    int order_;
    double theta0_;
    std::vector<double> gamma_, delta_;
    std::vector<std::string> fields_;
};

/// Linear IV: components (z, v, u) per factor,
///   z = sum U[0], v = sum U[1], u = sum U[2], d = pi z + v, y = theta0 d + u + rho v.
class IvComposer final : public Composer
{
  public:
    IvComposer(int order, double theta0, double pi, double rho);

    std::string name() const override { return "iv"; }
    const std::vector<std::string>& fields() const override { return fields_; }
    int required_width(Mask) const override { return 3; }
    void compose(const LatentCell& cell, std::span<double> record) const override;
    std::optional<std::vector<double>> theta0() const override { return std::vector<double>{theta0_}; }

  private:
    int order_;
    double theta0_, pi_, rho_;
    std::vector<std::string> fields_{"y", "d", "z"};
};

/// Data generating process: shape, one latent law per nonzero mask, and tau.
struct DgpSpec
{
    Shape shape;
    std::vector<LatentDist> latent;  // indexed by mask bits, slot 0 unused
    std::shared_ptr<const Composer> tau;
    std::vector<Mask> degenerate;    // masks forced to their mean

    /// Uniform latent law for every nonzero mask.
    static DgpSpec uniform_latent(Shape shape, const LatentDist& law, std::shared_ptr<const Composer> tau);

    const LatentDist& law(Mask e) const { return latent[e.bits()]; }
    /// Replaces the law of e by the constant at its mean and records the switch.
    void force_constant(Mask e);
    /// Same DGP on a different lattice.
    DgpSpec reshaped(Shape other) const;
    bool all_finite() const;
    void validate() const;
};

/// Observed K-way array: exactly one record per cell, optionally with the latent
/// table that produced it.
class ClusteredSample
{
  public:
    ClusteredSample(Shape shape, std::vector<std::string> fields);

    const Shape& shape() const { return shape_; }
    const std::vector<std::string>& fields() const { return fields_; }
    std::size_t width() const { return fields_.size(); }
    std::size_t cells() const { return shape_.cells(); }

    int field_index(const std::string& name) const;
    Record record(std::size_t cell) const { return {data_.data() + cell * width(), width()}; }
    std::span<double> record(std::size_t cell) { return {data_.data() + cell * width(), width()}; }
    std::vector<double> column(const std::string& name) const;

    const std::optional<LatentTable>& latent() const { return latent_; }
    void attach_latent(LatentTable table) { latent_ = std::move(table); }
    void drop_latent() { latent_.reset(); }

    bool operator==(const ClusteredSample&) const = default;

  private:
    Shape shape_;
    std::vector<std::string> fields_;
    std::vector<double> data_;
    std::optional<LatentTable> latent_;
};

/// Draws every U_{i.e} from its own keyed stream (seed, e, masked index).
LatentTable generate_latent(const DgpSpec& spec, std::uint64_t seed);

/// X_i = tau({U_{i.e}}) for every cell; keeps the table attached.
ClusteredSample materialize(const LatentTable& table, const DgpSpec& spec);

/// generate_latent followed by materialize.
ClusteredSample simulate(const DgpSpec& spec, std::uint64_t seed);

/// Latent values at one cell, viewed from the table.
LatentCell latent_cell(const LatentTable& table, const MultiIndex& cell);

/// Moves cell (i_1..i_K) to (pi_1(i_1)..pi_K(i_K)); permutations are 1-based.
/// An attached latent table is permuted consistently.
ClusteredSample permute(const ClusteredSample& sample, const std::vector<std::vector<int>>& perms);

/// CSV with columns i_1..i_K followed by the record fields.
void write_sample_csv(const ClusteredSample& sample, std::ostream& out);

}  // namespace mwdml
