#ifndef SLDCNN_GRADCHECK_HPP
#define SLDCNN_GRADCHECK_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sldcnn/arch.hpp"

namespace sldcnn {

struct GradcheckOptions {
  std::uint64_t seed = 1;
  std::size_t batch = 3;
  Real tolerance = 1e-4;
  std::size_t max_parameters = 10000;
  /// Test fixture: scales the analytic gradients reported for layers of
  /// this kind by (1 + fault_scale) before comparison.
  std::optional<LayerKind> fault;
  Real fault_scale = 0.05;
};

struct GradcheckEntry {
  LayerKind kind = LayerKind::kConv;
  Real max_rel_error = 0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // coordinates whose perturbation crossed a ReLU kink or pool argmax
  bool passed = true;
};

struct GradcheckReport {
  std::vector<GradcheckEntry> entries;  // one per layer kind present, in network order
  std::size_t parameters = 0;
  bool passed = true;

  std::string render() const;
};

/// Central-difference check of every parameter gradient and of the
/// gradient with respect to every layer's input, on random data. The
/// relative error is |a - n| / max(|a|, |n|, 1e-7). Throws UsageError when
/// the architecture has more than max_parameters parameters.
GradcheckReport gradcheck(const ArchSpec& arch, const GradcheckOptions& options = {});

}  // namespace sldcnn

#endif  // SLDCNN_GRADCHECK_HPP
