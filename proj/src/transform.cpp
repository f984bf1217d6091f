#include "stochsym/transform.hpp"

#include <cmath>

#include "stochsym/errors.hpp"

namespace stochsym {

namespace {

void require_positive(const Expression& eta, const Domain& domain) {
  if (eta.is_constant()) {
    if (!(eta.node().value > 0.0)) throw DomainError("eta must be positive");
    return;
  }
  const std::vector<double> pts = domain.sample_points();
  const std::size_t n = domain.dimension();
  const Tape tape(eta);
  for (std::size_t k = 0; k < pts.size() / n; ++k) {
    double v = 0.0;
    if (!tape.evaluate(std::span<const double>(pts.data() + k * n, n), std::span<double>(&v, 1))) continue;
    if (!(v > 0.0)) throw DomainError("eta is not positive at a sampled point of the domain");
  }
}

}  // namespace

Sde transform_sde(const FiniteTransformation& T, const Sde& sde) {
  if (T.n != sde.n || T.m != sde.m) throw DimensionError("transformation and SDE dimensions differ");
  require_positive(T.eta, sde.domain);

  const Expression inv_eta = 1.0 / T.eta;
  const Expression inv_root = 1.0 / sqrt(T.eta);
  ExprVector mu = generator_apply(sde, T.phi);
  for (Expression& e : mu) e = compose(inv_eta * e, T.phi_inverse);
  const ExprMatrix sigma = compose(inv_root * (jacobian(T.phi, T.n) * sde.sigma * T.B.transpose()), T.phi_inverse);
  return Sde(std::move(mu), sigma, sde.domain);
}

FiniteTransformation compose(const FiniteTransformation& T2, const FiniteTransformation& T1) {
  if (T1.n != T2.n || T1.m != T2.m) throw DimensionError("cannot compose transformations of different dimensions");
  return FiniteTransformation(compose(T2.phi, T1.phi), compose(T1.phi_inverse, T2.phi_inverse),
                              compose(T2.B, T1.phi) * T1.B, compose(T2.eta, T1.phi) * T1.eta, T1.domain);
}

FiniteTransformation invert(const FiniteTransformation& T) {
  return FiniteTransformation(T.phi_inverse, T.phi, compose(T.B, T.phi_inverse).transpose(),
                              1.0 / compose(T.eta, T.phi_inverse), T.domain);
}

InfinitesimalTransformation pushforward(const FiniteTransformation& T, const InfinitesimalTransformation& V) {
  if (T.n != V.n || T.m != V.m) throw DimensionError("transformation and infinitesimal transformation dimensions differ");
  const ExprMatrix Bt = T.B.transpose();
  ExprVector Y = compose(jacobian(T.phi, T.n) * V.Y, T.phi_inverse);
  ExprMatrix C = compose(T.B * V.C * Bt + directional(V.Y, T.B) * Bt, T.phi_inverse);
  Expression tau = compose(V.tau + directional(V.Y, T.eta) / T.eta, T.phi_inverse);
  return InfinitesimalTransformation(std::move(Y), std::move(C), std::move(tau));
}

InfinitesimalTransformation pullback(const FiniteTransformation& T, const InfinitesimalTransformation& V) {
  return pushforward(invert(T), V);
}

}  // namespace stochsym
