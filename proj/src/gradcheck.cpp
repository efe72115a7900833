#include "sldcnn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "sldcnn/error.hpp"
#include "sldcnn/model.hpp"

namespace sldcnn {

namespace {

constexpr Real kStepScale = 1e-5;
constexpr Real kErrorFloor = 1e-7;

// Which side of every ReLU kink each pre-activation sits on, plus every pool
// argmax, for layers >= from. A finite difference is only valid when the
// perturbation leaves this pattern unchanged.
std::vector<std::size_t> activation_pattern(const ForwardCache& cache, std::size_t from) {
  std::vector<std::size_t> p;
  for (std::size_t i = from; i < cache.layers.size(); ++i) {
    const LayerCache& lc = cache.layers[i];
    for (Real v : lc.pre_activation.values()) p.push_back(v > 0);
    p.insert(p.end(), lc.argmax.begin(), lc.argmax.end());
  }
  return p;
}

Real relative_error(Real analytic, Real numeric) {
  const Real denom = std::max({std::abs(analytic), std::abs(numeric), kErrorFloor});
  return std::abs(analytic - numeric) / denom;
}

struct Probe {
  Real loss;
  std::vector<std::size_t> pattern;
};

}  // namespace

GradcheckReport gradcheck(const ArchSpec& arch, const GradcheckOptions& options) {
  Model model(arch.input, ModelOptions{options.seed});
  for (const LayerSpec& s : arch.layers) model.add_layer(s);
  if (model.parameter_count() > options.max_parameters) {
    throw UsageError("gradcheck: architecture has " + std::to_string(model.parameter_count()) +
                     " parameters, limit is " + std::to_string(options.max_parameters));
  }

  Rng rng(derive_seed(options.seed, 7));
  Shape in_shape{options.batch};
  const Shape sample = arch.input.shape();
  in_shape.insert(in_shape.end(), sample.begin(), sample.end());
  const Tensor x = random_uniform(in_shape, -1, 1, rng);
  std::vector<int> labels(options.batch);
  for (int& l : labels) l = static_cast<int>(rng.below(model.classes()));

  const ForwardCache base = model.forward(x);
  const SoftmaxResult sm = softmax_xent(base.output, labels);
  std::vector<Tensor> input_grads;
  Gradients grads = model.backward(base, sm.grad_logits, 0, &input_grads);

  if (options.fault) {
    for (std::size_t i = 0; i < model.depth(); ++i) {
      if (model.layers()[i].spec.kind != *options.fault) continue;
      for (Tensor& g : grads[i]) g = scale(g, 1 + options.fault_scale);
      input_grads[i] = scale(input_grads[i], 1 + options.fault_scale);
    }
  }

  auto probe = [&](const Tensor& input, std::size_t from) {
    const ForwardCache c = model.forward(input, from);
    return Probe{softmax_xent(c.output, labels).loss, activation_pattern(c, from)};
  };

  std::map<LayerKind, GradcheckEntry> by_kind;
  std::vector<LayerKind> order;
  auto record = [&](LayerKind kind, Real analytic, Real numeric, bool valid) {
    auto [it, inserted] = by_kind.try_emplace(kind);
    if (inserted) {
      it->second.kind = kind;
      order.push_back(kind);
    }
    GradcheckEntry& e = it->second;
    if (!valid) {
      ++e.skipped;
      return;
    }
    ++e.checked;
    e.max_rel_error = std::max(e.max_rel_error, relative_error(analytic, numeric));
  };

  for (std::size_t i = 0; i < model.depth(); ++i) {
    const LayerKind kind = model.layers()[i].spec.kind;

    // gradient with respect to this layer's input activations
    const std::vector<std::size_t> pattern_i = activation_pattern(base, i);
    Tensor act = base.layers[i].input;
    for (std::size_t e = 0; e < act.size(); ++e) {
      const Real saved = act[e];
      const Real h = kStepScale * std::max(Real{1}, std::abs(saved));
      act[e] = saved + h;
      const Probe plus = probe(act, i);
      act[e] = saved - h;
      const Probe minus = probe(act, i);
      act[e] = saved;
      const bool valid = plus.pattern == pattern_i && minus.pattern == pattern_i;
      record(kind, input_grads[i][e], (plus.loss - minus.loss) / (2 * h), valid);
    }

    // parameter gradients
    const std::vector<std::size_t> pattern_0 = activation_pattern(base, 0);
    std::vector<Tensor*> params = model.layers()[i].parameters();
    for (std::size_t j = 0; j < params.size(); ++j) {
      Tensor& p = *params[j];
      for (std::size_t e = 0; e < p.size(); ++e) {
        const Real saved = p[e];
        const Real h = kStepScale * std::max(Real{1}, std::abs(saved));
        p[e] = saved + h;
        const Probe plus = probe(x, 0);
        p[e] = saved - h;
        const Probe minus = probe(x, 0);
        p[e] = saved;
        const bool valid = plus.pattern == pattern_0 && minus.pattern == pattern_0;
        record(kind, grads[i][j][e], (plus.loss - minus.loss) / (2 * h), valid);
      }
    }
  }

  GradcheckReport report;
  report.parameters = model.parameter_count();
  for (LayerKind k : order) {
    GradcheckEntry e = by_kind.at(k);
    e.passed = e.checked > 0 && e.max_rel_error < options.tolerance;
    report.passed = report.passed && e.passed;
    report.entries.push_back(e);
  }
  return report;
}

std::string GradcheckReport::render() const {
  std::string out = "layer     max_rel_error  checked  skipped  result\n";
  char buf[128];
  for (const GradcheckEntry& e : entries) {
    std::snprintf(buf, sizeof buf, "%-9s %13.3e  %7zu  %7zu  %s\n", layer_kind_name(e.kind),
                  e.max_rel_error, e.checked, e.skipped, e.passed ? "pass" : "FAIL");
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "parameters: %zu\noverall: %s\n", parameters,
                passed ? "pass" : "FAIL");
  out += buf;
  return out;
}

}  // namespace sldcnn
