#pragma once

#include "stochsym/model.hpp"

namespace stochsym {

/// E_T(mu) = ((1/eta) L(Phi)) o Phi^-1 and
/// E_T(sigma) = ((1/sqrt(eta)) D(Phi) sigma B^T) o Phi^-1.
/// The result keeps the domain of the input SDE. Throws DomainError when
/// eta is not positive at a sampled point.
Sde transform_sde(const FiniteTransformation& T, const Sde& sde);

/// T2 o T1 = (Phi2 o Phi1, (B2 o Phi1) B1, (eta2 o Phi1) eta1), defined on the
/// domain of T1.
FiniteTransformation compose(const FiniteTransformation& T2, const FiniteTransformation& T1);

/// T^-1 = (Phi^-1, (B o Phi^-1)^T, 1 / (eta o Phi^-1)).
FiniteTransformation invert(const FiniteTransformation& T);

/// T_*(V) = ((D(Phi) Y) o Phi^-1, (B C B^T + Y(B) B^T) o Phi^-1, (tau + Y(eta)/eta) o Phi^-1).
InfinitesimalTransformation pushforward(const FiniteTransformation& T, const InfinitesimalTransformation& V);

/// T^*(V) = (T^-1)_*(V).
InfinitesimalTransformation pullback(const FiniteTransformation& T, const InfinitesimalTransformation& V);

}  // namespace stochsym
