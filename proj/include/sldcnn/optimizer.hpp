#ifndef SLDCNN_OPTIMIZER_HPP
#define SLDCNN_OPTIMIZER_HPP

#include <cstddef>

#include "sldcnn/tensor.hpp"

namespace sldcnn {

/// Per-parameter RMSProp accumulator.
struct RmsPropState {
  Tensor r;            // moving average of the squared gradient, same shape as the parameter
  Real gamma = 0.9;    // decay rate, in [0, 1)
  Real epsilon = 1e-8; // added to sqrt(r) in the update denominator
};

RmsPropState make_rmsprop_state(const Shape& shape, Real gamma = 0.9, Real epsilon = 1e-8);

/// One RMSProp update, in place:
///
///   r     <- (1 - gamma) * grad^2 + gamma * r
///   theta <- theta - alpha * grad / (sqrt(r) + epsilon)
///
/// Elements with a zero gradient do not move, which keeps epsilon = 0 usable
/// from a zero accumulator. Throws ShapeError on mismatched shapes and
/// NumericError on a non-finite gradient or update.
void rmsprop_step(Tensor& theta, const Tensor& grad, RmsPropState& state, Real alpha);

/// Linear decay of the global rate from alpha0 to final_fraction * alpha0
/// over `total_iters` steps, then held constant.
struct LrSchedule {
  Real alpha0 = 0.01;
  Real final_fraction = 0.1;
  std::size_t total_iters = 1;
};

/// Rate at step `iter` (0-based). A schedule of one step never decays.
Real lr_at(const LrSchedule& schedule, std::size_t iter);

void validate(const LrSchedule& schedule);

}  // namespace sldcnn

#endif  // SLDCNN_OPTIMIZER_HPP
