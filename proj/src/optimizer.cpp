#include "sldcnn/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sldcnn/error.hpp"

namespace sldcnn {

RmsPropState make_rmsprop_state(const Shape& shape, Real gamma, Real epsilon) {
  if (!(gamma >= 0 && gamma < 1)) throw RangeError("rmsprop: gamma must lie in [0,1)");
  if (!(epsilon >= 0)) throw RangeError("rmsprop: epsilon must be >= 0");
  return RmsPropState{Tensor(shape), gamma, epsilon};
}

void rmsprop_step(Tensor& theta, const Tensor& grad, RmsPropState& state, Real alpha) {
  if (theta.shape() != grad.shape() || theta.shape() != state.r.shape()) {
    throw ShapeError("rmsprop_step: parameter " + shape_string(theta.shape()) + ", gradient " +
                     shape_string(grad.shape()) + ", accumulator " +
                     shape_string(state.r.shape()) + " must agree");
  }
  if (!(alpha > 0)) throw RangeError("rmsprop_step: alpha must be positive");
  if (!grad.all_finite()) throw NumericError("rmsprop_step: non-finite gradient");

  const Real gamma = state.gamma;
  const Real eps = state.epsilon;
  Real* r = state.r.data();
  Real* th = theta.data();
  const Real* g = grad.data();
  for (std::size_t i = 0; i < theta.size(); ++i) {
    r[i] = (1 - gamma) * g[i] * g[i] + gamma * r[i];
    if (g[i] == 0) continue;
    th[i] -= alpha * g[i] / (std::sqrt(r[i]) + eps);
  }
  if (!theta.all_finite()) throw NumericError("rmsprop_step: non-finite parameter after update");
}

void validate(const LrSchedule& s) {
  if (!(s.alpha0 > 0)) throw RangeError("learning rate must be positive");
  if (!(s.final_fraction > 0 && s.final_fraction <= 1)) {
    throw RangeError("final learning-rate fraction must lie in (0,1]");
  }
  if (s.total_iters == 0) throw RangeError("schedule needs at least one iteration");
}

Real lr_at(const LrSchedule& s, std::size_t iter) {
  if (s.total_iters <= 1) return s.alpha0;
  const Real last = static_cast<Real>(s.total_iters - 1);
  const Real t = std::min(static_cast<Real>(iter), last) / last;
  return s.alpha0 * (1 - (1 - s.final_fraction) * t);
}

}  // namespace sldcnn
