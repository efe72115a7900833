#include "sldcnn/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <thread>

#include "sldcnn/error.hpp"

namespace sldcnn {

std::vector<Tensor*> Layer::parameters() {
  return std::visit(
      [](auto& op) -> std::vector<Tensor*> {
        if constexpr (std::is_same_v<std::decay_t<decltype(op)>, MaxPoolLayer>) {
          return {};
        } else {
          return {&op.weights, &op.biases};
        }
      },
      op);
}

std::vector<const Tensor*> Layer::parameters() const {
  auto params = const_cast<Layer*>(this)->parameters();
  return {params.begin(), params.end()};
}

namespace {

Shape batched(std::size_t batch, const Shape& sample) {
  Shape s{batch};
  s.insert(s.end(), sample.begin(), sample.end());
  return s;
}

std::size_t argmax_row(const Real* row, std::size_t n) {
  return static_cast<std::size_t>(std::max_element(row, row + n) - row);
}

}  // namespace

Model::Model(InputGeometry input, ModelOptions options)
    : input_(input), options_(options), rng_(options.seed) {
  if (input.height == 0 || input.width == 0 || input.channels == 0) {
    throw ShapeError("input geometry must have positive extents");
  }
}

Shape Model::output_shape() const {
  return layers_.empty() ? input_.shape() : layers_.back().output_shape;
}

std::vector<LayerSpec> Model::specs() const {
  std::vector<LayerSpec> out;
  for (const Layer& l : layers_) out.push_back(l.spec);
  return out;
}

std::string Model::arch_string() const { return render_layers(specs()); }

bool Model::trainable() const {
  return !layers_.empty() && layers_.back().spec.kind == LayerKind::kSoftmax;
}

std::size_t Model::classes() const {
  if (!trainable()) throw StateError("model has no softmax output layer");
  return layers_.back().spec.first;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const Layer& l : layers_) {
    for (const Tensor* p : l.parameters()) n += p->size();
  }
  return n;
}

void Model::add_layer(const LayerSpec& spec) {
  if (trainable()) {
    throw ShapeError("cannot append " + spec.render() + " after the softmax output layer");
  }
  const Shape in = output_shape();
  Shape out;
  try {
    out = layer_output_shape(in, spec);
  } catch (const ShapeError& e) {
    throw ShapeError("layer " + std::to_string(layers_.size() + 1) + " (" + spec.render() +
                     "): " + e.what());
  }

  const Real gain = options_.init_scale;
  auto init = [&](const Shape& shape, std::size_t fan_in) {
    const Real bound = gain * std::sqrt(Real{6} / static_cast<Real>(fan_in));
    return random_uniform(shape, -bound, bound, rng_);
  };

  Layer layer{spec, in, out, MaxPoolLayer{}, {}};
  switch (spec.kind) {
    case LayerKind::kConv: {
      const std::size_t c = in[0], k = spec.second;
      layer.op = ConvLayer{init({spec.first, c, k, k}, c * k * k), Tensor({spec.first})};
      break;
    }
    case LayerKind::kPool:
      layer.op = MaxPoolLayer{spec.first, spec.second};
      break;
    case LayerKind::kFC: {
      const std::size_t width = shape_size(in);
      layer.op = FCLayer{init({spec.first, width}, width), Tensor({spec.first})};
      break;
    }
    case LayerKind::kSoftmax: {
      const std::size_t width = shape_size(in);
      layer.op = SoftmaxLayer{init({spec.first, width}, width), Tensor({spec.first})};
      break;
    }
  }
  for (const Tensor* p : layer.parameters()) {
    layer.state.push_back(make_rmsprop_state(p->shape(), options_.gamma, options_.epsilon));
  }
  layers_.push_back(std::move(layer));
}

void Model::remove_layer() {
  if (layers_.empty()) throw StateError("remove_layer: model is empty");
  layers_.pop_back();
}

ForwardCache Model::forward(const Tensor& batch, std::size_t from) const {
  if (from > layers_.size()) throw StateError("forward: start layer out of range");
  const Shape expected = from < layers_.size() ? layers_[from].input_shape : output_shape();
  if (batch.rank() == 0 || shape_size(expected) * batch.dim(0) != batch.size() ||
      (batch.rank() > 2 && Shape(batch.shape().begin() + 1, batch.shape().end()) != expected)) {
    throw ShapeError("forward: batch " + shape_string(batch.shape()) + " does not match input " +
                     shape_string(expected));
  }
  const std::size_t n = batch.dim(0);

  ForwardCache cache;
  cache.layers.resize(layers_.size());
  Tensor x = batch.reshaped(batched(n, expected));
  for (std::size_t i = from; i < layers_.size(); ++i) {
    const Layer& layer = layers_[i];
    LayerCache& lc = cache.layers[i];
    switch (layer.spec.kind) {
      case LayerKind::kConv: {
        lc.input = std::move(x);
        lc.pre_activation = conv_forward(lc.input, std::get<ConvLayer>(layer.op));
        x = relu(lc.pre_activation);
        break;
      }
      case LayerKind::kPool: {
        lc.input = std::move(x);
        PoolResult r = maxpool_forward(lc.input, std::get<MaxPoolLayer>(layer.op));
        lc.argmax = std::move(r.argmax);
        x = std::move(r.output);
        break;
      }
      case LayerKind::kFC: {
        lc.input = std::move(x).reshaped({n, shape_size(layer.input_shape)});
        lc.pre_activation = fc_forward(lc.input, std::get<FCLayer>(layer.op));
        x = relu(lc.pre_activation);
        break;
      }
      case LayerKind::kSoftmax: {
        lc.input = std::move(x).reshaped({n, shape_size(layer.input_shape)});
        x = softmax_logits(lc.input, std::get<SoftmaxLayer>(layer.op));
        break;
      }
    }
  }
  if (!x.all_finite()) throw NumericError("forward: non-finite network output");
  cache.output = std::move(x);
  return cache;
}

Tensor Model::logits(const Tensor& batch) const {
  if (!trainable()) throw StateError("model has no softmax output layer");
  return forward(batch).output;
}

std::vector<int> Model::predict(const Tensor& batch) const {
  const Tensor z = logits(batch);
  const std::size_t n = z.dim(0), k = z.dim(1);
  std::vector<int> out(n);
  for (std::size_t b = 0; b < n; ++b) out[b] = static_cast<int>(argmax_row(z.data() + b * k, k));
  return out;
}

Gradients Model::backward(const ForwardCache& cache, const Tensor& grad_output, std::size_t from,
                          std::vector<Tensor>* input_grads) const {
  if (cache.layers.size() != layers_.size()) {
    throw StateError("backward: cache was produced by a different layer stack");
  }
  if (grad_output.shape() != cache.output.shape()) {
    throw ShapeError("backward: gradient " + shape_string(grad_output.shape()) +
                     " does not match output " + shape_string(cache.output.shape()));
  }
  Gradients grads(layers_.size());
  if (input_grads) input_grads->assign(layers_.size(), Tensor{});

  Tensor g = grad_output;
  for (std::size_t i = layers_.size(); i-- > from;) {
    const Layer& layer = layers_[i];
    const LayerCache& lc = cache.layers[i];
    const std::size_t n = lc.input.dim(0);
    switch (layer.spec.kind) {
      case LayerKind::kConv: {
        g = relu_backward(g, lc.pre_activation);
        ParamGrads pg = conv_backward(g, lc.input, std::get<ConvLayer>(layer.op));
        grads[i] = {std::move(pg.weights), std::move(pg.biases)};
        g = std::move(pg.input);
        break;
      }
      case LayerKind::kPool:
        g = maxpool_backward(g, lc.argmax, lc.input.shape());
        break;
      case LayerKind::kFC: {
        g = relu_backward(g, lc.pre_activation);
        ParamGrads pg = fc_backward(g, lc.input, std::get<FCLayer>(layer.op));
        grads[i] = {std::move(pg.weights), std::move(pg.biases)};
        g = std::move(pg.input).reshaped(batched(n, layer.input_shape));
        break;
      }
      case LayerKind::kSoftmax: {
        ParamGrads pg = softmax_logits_backward(g, lc.input, std::get<SoftmaxLayer>(layer.op));
        grads[i] = {std::move(pg.weights), std::move(pg.biases)};
        g = std::move(pg.input).reshaped(batched(n, layer.input_shape));
        break;
      }
    }
    if (input_grads) (*input_grads)[i] = g;
  }
  return grads;
}

BatchResult Model::batch_gradients(const Tensor& images, std::span<const int> labels,
                                   std::size_t threads) const {
  if (!trainable()) throw StateError("model has no softmax output layer");
  const std::size_t n = images.dim(0);
  if (labels.size() != n) throw ShapeError("batch_gradients: label count differs from batch size");
  const std::size_t shards = std::clamp<std::size_t>(threads, 1, n);

  std::vector<BatchResult> parts(shards);
  auto run_shard = [&](std::size_t s) {
    const std::size_t begin = n * s / shards, end = n * (s + 1) / shards;
    const Tensor x = shards == 1 ? images : images.slice_rows(begin, end);
    const auto y = labels.subspan(begin, end - begin);
    ForwardCache cache = forward(x);
    SoftmaxResult sm = softmax_xent(cache.output, y, n);
    BatchResult& r = parts[s];
    r.loss = sm.loss;
    const std::size_t k = cache.output.dim(1);
    for (std::size_t b = 0; b < y.size(); ++b) {
      if (static_cast<int>(argmax_row(cache.output.data() + b * k, k)) == y[b]) ++r.correct;
    }
    r.grads = backward(cache, sm.grad_logits);
  };

  if (shards == 1) {
    run_shard(0);
    return std::move(parts[0]);
  }
  std::vector<std::jthread> pool;
  std::vector<std::exception_ptr> errors(shards);
  for (std::size_t s = 0; s < shards; ++s) {
    pool.emplace_back([&, s] {
      try {
        run_shard(s);
      } catch (...) {
        errors[s] = std::current_exception();
      }
    });
  }
  pool.clear();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  BatchResult total = std::move(parts[0]);
  for (std::size_t s = 1; s < shards; ++s) {
    total.loss += parts[s].loss;
    total.correct += parts[s].correct;
    for (std::size_t i = 0; i < total.grads.size(); ++i) {
      for (std::size_t j = 0; j < total.grads[i].size(); ++j) {
        Tensor& acc = total.grads[i][j];
        const Tensor& add = parts[s].grads[i][j];
        for (std::size_t e = 0; e < acc.size(); ++e) acc[e] += add[e];
      }
    }
  }
  return total;
}

void Model::apply_gradients(const Gradients& grads, Real alpha, std::size_t from) {
  if (grads.size() != layers_.size()) throw StateError("apply_gradients: layer count mismatch");
  for (std::size_t i = from; i < layers_.size(); ++i) {
    Layer& layer = layers_[i];
    std::vector<Tensor*> params = layer.parameters();
    if (grads[i].size() != params.size()) {
      throw StateError("apply_gradients: missing gradients for layer " + std::to_string(i + 1));
    }
    for (std::size_t j = 0; j < params.size(); ++j) {
      rmsprop_step(*params[j], grads[i][j], layer.state[j], alpha);
    }
  }
}

std::string render_phase_log(const std::vector<PhaseEntry>& log) {
  std::ostringstream os;
  for (const PhaseEntry& e : log) os << e.phase << '\t' << e.arch << '\t' << e.epochs << '\n';
  return os.str();
}

}  // namespace sldcnn
