#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace mwdml {

/// Flat observation record; field names live in the owning sample's layout.
using Record = std::span<const double>;
using RecordFn = std::function<double(Record)>;

/// Named real-valued functions of an observation's covariates (e.g. "l" and "m"
/// for the partially linear model).
class NuisanceParam
{
  public:
    NuisanceParam() = default;

    void set(const std::string& name, RecordFn fn) { fns_[name] = std::move(fn); }
    bool has(const std::string& name) const { return fns_.count(name) > 0; }
    const RecordFn& get(const std::string& name) const;
    double operator()(const std::string& name, Record x) const { return get(name)(x); }
    std::vector<std::string> names() const;
    bool empty() const { return fns_.empty(); }

    /// eta + tau * direction, componentwise over the names present in `direction`.
    NuisanceParam perturbed(const NuisanceParam& direction, double tau) const;

  private:
    std::map<std::string, RecordFn> fns_;
};

}  // namespace mwdml
