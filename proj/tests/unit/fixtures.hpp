#pragma once

#include <memory>
#include <vector>

#include "mwdml/dgp.hpp"

namespace fixtures {

using namespace mwdml;

/// y = sum of one +-1 factor per mask.
inline DgpSpec additive_pm1(Shape shape)
{
    const int K = shape.order();
    return DgpSpec::uniform_latent(std::move(shape), LatentDist::rademacher({1.0}),
                                   std::make_shared<AdditiveComposer>(K, 0.0, std::vector<double>{}));
}

/// y = u10 * u01 with +-1 factors (K = 2).
inline DgpSpec product_pm1(Shape shape)
{
    return DgpSpec::uniform_latent(std::move(shape), LatentDist::rademacher({1.0}),
                                   std::make_shared<ProductComposer>(std::vector<Mask>{Mask(1), Mask(2)},
                                                                     std::vector<Mask>{}));
}

/// Partially linear DGP with +-1 latent components, enumerable exactly.
inline DgpSpec plr_pm1(Shape shape, std::vector<double> gamma, std::vector<double> delta, double theta0 = 1.0)
{
    const int K = shape.order();
    const auto p = gamma.size();
    auto tau = std::make_shared<PlrComposer>(K, theta0, std::move(gamma), std::move(delta));
    return DgpSpec::uniform_latent(std::move(shape), LatentDist::rademacher(std::vector<double>(p + 2, 1.0)), tau);
}

/// Partially linear DGP with normal latent components: sd 1 for the one-way
/// factors and `cell_sd` for the full-mask factor.
inline DgpSpec plr_normal(Shape shape, std::vector<double> gamma, std::vector<double> delta, double cell_sd = 0.5,
                          double theta0 = 1.0)
{
    const int K = shape.order();
    const auto width = gamma.size() + 2;
    auto tau = std::make_shared<PlrComposer>(K, theta0, std::move(gamma), std::move(delta));
    auto spec = DgpSpec::uniform_latent(std::move(shape),
                                        LatentDist::normal(std::vector<double>(width, 0.0),
                                                           std::vector<double>(width, 1.0)),
                                        tau);
    spec.latent[Mask::full(K).bits()] =
        LatentDist::normal(std::vector<double>(width, 0.0), std::vector<double>(width, cell_sd));
    return spec;
}

}  // namespace fixtures
