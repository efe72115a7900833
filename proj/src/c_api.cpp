#include "sldcnn/sldcnn.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <sstream>
#include <string>

#include "sldcnn/config.hpp"
#include "sldcnn/error.hpp"
#include "sldcnn/gradcheck.hpp"
#include "sldcnn/metrics.hpp"
#include "sldcnn/model.hpp"
#include "sldcnn/trainer.hpp"

struct sldcnn_config {
  sldcnn::RunConfig values;
};

struct sldcnn_data {
  sldcnn::Split split;
};

struct sldcnn_model {
  sldcnn::Model model;
};

struct sldcnn_run {
  std::vector<sldcnn::EpochRecord> records;
};

struct sldcnn_eval {
  sldcnn::ConfusionMatrix matrix;
  std::vector<std::string> class_names;
};

namespace {

thread_local std::string g_last_error;

sldcnn_status to_status(sldcnn::ErrorCode code) {
  using sldcnn::ErrorCode;
  switch (code) {
    case ErrorCode::kShape: return SLDCNN_ERR_SHAPE;
    case ErrorCode::kRange: return SLDCNN_ERR_RANGE;
    case ErrorCode::kDomain: return SLDCNN_ERR_DOMAIN;
    case ErrorCode::kNumeric: return SLDCNN_ERR_NUMERIC;
    case ErrorCode::kParse: return SLDCNN_ERR_PARSE;
    case ErrorCode::kConfig: return SLDCNN_ERR_CONFIG;
    case ErrorCode::kState: return SLDCNN_ERR_STATE;
    case ErrorCode::kFormat: return SLDCNN_ERR_FORMAT;
    case ErrorCode::kIo: return SLDCNN_ERR_IO;
    case ErrorCode::kLabel: return SLDCNN_ERR_LABEL;
    case ErrorCode::kData: return SLDCNN_ERR_DATA;
    case ErrorCode::kUsage: return SLDCNN_ERR_USAGE;
    case ErrorCode::kInternal: return SLDCNN_ERR_INTERNAL;
  }
  return SLDCNN_ERR_INTERNAL;
}

// Runs `body`, translating exceptions into status codes.
template <typename F>
sldcnn_status guarded(F&& body) {
  g_last_error.clear();
  try {
    body();
    return SLDCNN_OK;
  } catch (const sldcnn::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return SLDCNN_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SLDCNN_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown exception";
    return SLDCNN_ERR_INTERNAL;
  }
}

sldcnn_status null_arg(const char* what) {
  g_last_error = std::string("null argument: ") + what;
  return SLDCNN_ERR_NULL;
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

const sldcnn::Dataset& pick(const sldcnn_data* data, sldcnn_split split) {
  if (split == SLDCNN_SPLIT_TRAIN) return data->split.train;
  if (split == SLDCNN_SPLIT_TEST) return data->split.test;
  throw sldcnn::UsageError("unknown split");
}

sldcnn_epoch_record to_c(const sldcnn::EpochRecord& r) {
  return {r.phase.c_str(), static_cast<uint32_t>(r.epoch), r.train_loss, r.train_error,
          r.test_error, r.lr, r.wall_ms};
}

}  // namespace

extern "C" {

const char* sldcnn_version(void) { return "1.0.0"; }

const char* sldcnn_status_name(sldcnn_status status) {
  switch (status) {
    case SLDCNN_OK: return "ok";
    case SLDCNN_ERR_SHAPE: return "shape error";
    case SLDCNN_ERR_RANGE: return "range error";
    case SLDCNN_ERR_DOMAIN: return "domain error";
    case SLDCNN_ERR_NUMERIC: return "numeric error";
    case SLDCNN_ERR_PARSE: return "parse error";
    case SLDCNN_ERR_CONFIG: return "config error";
    case SLDCNN_ERR_STATE: return "state error";
    case SLDCNN_ERR_FORMAT: return "format error";
    case SLDCNN_ERR_IO: return "i/o error";
    case SLDCNN_ERR_LABEL: return "label error";
    case SLDCNN_ERR_DATA: return "data error";
    case SLDCNN_ERR_USAGE: return "usage error";
    case SLDCNN_ERR_INTERNAL: return "internal error";
    case SLDCNN_ERR_NULL: return "null argument";
  }
  return "unknown status";
}

const char* sldcnn_last_error(void) { return g_last_error.c_str(); }

void sldcnn_string_free(char* s) { std::free(s); }

sldcnn_status sldcnn_config_create(sldcnn_config** out) {
  if (!out) return null_arg("out");
  return guarded([&] { *out = new sldcnn_config{}; });
}

void sldcnn_config_destroy(sldcnn_config* config) { delete config; }

sldcnn_status sldcnn_config_clone(const sldcnn_config* config, sldcnn_config** out) {
  if (!config || !out) return null_arg("config/out");
  return guarded([&] { *out = new sldcnn_config{*config}; });
}

sldcnn_status sldcnn_config_set(sldcnn_config* config, const char* key, const char* value) {
  if (!config || !key || !value) return null_arg("config/key/value");
  return guarded([&] { config->values.set(key, value); });
}

sldcnn_status sldcnn_config_get(const sldcnn_config* config, const char* key, char** value) {
  if (!config || !key || !value) return null_arg("config/key/value");
  return guarded([&] {
    const auto v = config->values.get(key);
    if (!v) throw sldcnn::StateError(std::string("configuration key '") + key + "' is not set");
    *value = dup_string(*v);
  });
}

sldcnn_status sldcnn_config_load_file(sldcnn_config* config, const char* path,
                                      int override_existing) {
  if (!config || !path) return null_arg("config/path");
  return guarded([&] { config->values.merge_file(path, override_existing != 0); });
}

sldcnn_status sldcnn_config_resolve(sldcnn_config* config) {
  if (!config) return null_arg("config");
  return guarded([&] { config->values = sldcnn::resolve(config->values); });
}

sldcnn_status sldcnn_config_resolve_data(sldcnn_config* config) {
  if (!config) return null_arg("config");
  return guarded(
      [&] { config->values = sldcnn::resolve(config->values, sldcnn::ResolveScope::kData); });
}

sldcnn_status sldcnn_config_render(const sldcnn_config* config, char** text) {
  if (!config || !text) return null_arg("config/text");
  return guarded([&] { *text = dup_string(config->values.render()); });
}

sldcnn_status sldcnn_arch_describe(const char* arch, uint32_t height, uint32_t width,
                                   uint32_t channels, char** report) {
  if (!arch || !report) return null_arg("arch/report");
  return guarded([&] {
    const sldcnn::ArchSpec spec = sldcnn::make_arch(arch, {height, width, channels});
    const auto shapes = sldcnn::infer_shapes(spec);
    std::ostringstream os;
    os << "input  " << sldcnn::shape_string(spec.input.shape()) << '\n';
    for (std::size_t i = 0; i < shapes.size(); ++i) {
      os << spec.layers[i].render() << "  " << sldcnn::shape_string(shapes[i]) << '\n';
    }
    *report = dup_string(os.str());
  });
}

sldcnn_status sldcnn_data_load(const sldcnn_config* config, sldcnn_data** out) {
  if (!config || !out) return null_arg("config/out");
  return guarded([&] { *out = new sldcnn_data{sldcnn::load_data(config->values)}; });
}

void sldcnn_data_destroy(sldcnn_data* data) { delete data; }

sldcnn_status sldcnn_data_info(const sldcnn_data* data, size_t* train_size, size_t* test_size,
                               size_t* classes, size_t* extent) {
  if (!data) return null_arg("data");
  return guarded([&] {
    if (train_size) *train_size = data->split.train.size();
    if (test_size) *test_size = data->split.test.size();
    if (classes) *classes = data->split.train.classes();
    if (extent) *extent = data->split.train.images.dim(3);
  });
}

sldcnn_status sldcnn_data_labels(const sldcnn_data* data, sldcnn_split split, int32_t* labels,
                                 size_t capacity) {
  if (!data || !labels) return null_arg("data/labels");
  return guarded([&] {
    const sldcnn::Dataset& d = pick(data, split);
    if (capacity < d.size()) throw sldcnn::RangeError("label buffer too small");
    for (std::size_t i = 0; i < d.size(); ++i) labels[i] = d.labels[i];
  });
}

sldcnn_status sldcnn_synth_write(const sldcnn_config* config, const char* dir) {
  if (!config || !dir) return null_arg("config/dir");
  return guarded([&] {
    sldcnn::write_corpus(sldcnn::synth_corpus(sldcnn::synth_options(config->values)), dir);
  });
}

sldcnn_status sldcnn_train(const sldcnn_config* config, const sldcnn_data* data,
                           sldcnn_epoch_fn on_epoch, void* user, sldcnn_model** model,
                           sldcnn_run** run) {
  if (!config || !data) return null_arg("config/data");
  return guarded([&] {
    const sldcnn::TrainConfig tc = sldcnn::train_config(config->values);
    const sldcnn::ArchSpec arch = sldcnn::arch_spec(config->values);
    sldcnn::EpochCallback cb;
    if (on_epoch) {
      cb = [&](const sldcnn::EpochRecord& r) {
        const sldcnn_epoch_record rec = to_c(r);
        on_epoch(&rec, user);
      };
    }
    sldcnn::TrainResult result = sldcnn::train(tc, arch, data->split.train, data->split.test, cb);
    if (run) *run = new sldcnn_run{std::move(result.records)};
    if (model) *model = new sldcnn_model{std::move(result.model)};
  });
}

void sldcnn_run_destroy(sldcnn_run* run) { delete run; }

size_t sldcnn_run_size(const sldcnn_run* run) { return run ? run->records.size() : 0; }

sldcnn_status sldcnn_run_record(const sldcnn_run* run, size_t index, sldcnn_epoch_record* out) {
  if (!run || !out) return null_arg("run/out");
  return guarded([&] {
    if (index >= run->records.size()) throw sldcnn::RangeError("record index out of range");
    *out = to_c(run->records[index]);
  });
}

sldcnn_status sldcnn_run_write_metrics(const sldcnn_run* run, const char* path) {
  if (!run || !path) return null_arg("run/path");
  return guarded([&] { sldcnn::write_metrics(run->records, path); });
}

sldcnn_status sldcnn_run_read_metrics(const char* path, sldcnn_run** out) {
  if (!path || !out) return null_arg("path/out");
  return guarded([&] { *out = new sldcnn_run{sldcnn::read_metrics(path)}; });
}

sldcnn_status sldcnn_model_save(const sldcnn_model* model, const char* path) {
  if (!model || !path) return null_arg("model/path");
  return guarded([&] { sldcnn::save_checkpoint(model->model, path); });
}

sldcnn_status sldcnn_model_load(const char* path, sldcnn_model** out) {
  if (!path || !out) return null_arg("path/out");
  return guarded([&] { *out = new sldcnn_model{sldcnn::load_checkpoint(path)}; });
}

void sldcnn_model_destroy(sldcnn_model* model) { delete model; }

sldcnn_status sldcnn_model_input(const sldcnn_model* model, uint32_t* height, uint32_t* width,
                                 uint32_t* channels) {
  if (!model) return null_arg("model");
  return guarded([&] {
    const sldcnn::InputGeometry& g = model->model.input();
    if (height) *height = static_cast<uint32_t>(g.height);
    if (width) *width = static_cast<uint32_t>(g.width);
    if (channels) *channels = static_cast<uint32_t>(g.channels);
  });
}

sldcnn_status sldcnn_model_arch(const sldcnn_model* model, char** arch) {
  if (!model || !arch) return null_arg("model/arch");
  return guarded([&] { *arch = dup_string(model->model.arch_string()); });
}

sldcnn_status sldcnn_model_phase_log(const sldcnn_model* model, char** text) {
  if (!model || !text) return null_arg("model/text");
  return guarded([&] { *text = dup_string(sldcnn::render_phase_log(model->model.phase_log())); });
}

sldcnn_status sldcnn_model_predict(const sldcnn_model* model, const sldcnn_data* data,
                                   sldcnn_split split, int32_t* predictions, size_t capacity) {
  if (!model || !data || !predictions) return null_arg("model/data/predictions");
  return guarded([&] {
    const sldcnn::Dataset& d = pick(data, split);
    sldcnn::check_compatible(model->model, d);
    if (capacity < d.size()) throw sldcnn::RangeError("prediction buffer too small");
    const std::vector<int> p = sldcnn::predict_dataset(model->model, d);
    for (std::size_t i = 0; i < p.size(); ++i) predictions[i] = p[i];
  });
}

sldcnn_status sldcnn_evaluate(const sldcnn_model* model, const sldcnn_data* data,
                              sldcnn_split split, sldcnn_eval** out) {
  if (!model || !data || !out) return null_arg("model/data/out");
  return guarded([&] {
    const sldcnn::Dataset& d = pick(data, split);
    sldcnn::check_compatible(model->model, d);
    const std::vector<int> p = sldcnn::predict_dataset(model->model, d);
    *out = new sldcnn_eval{sldcnn::confusion(p, d.labels, d.classes()), d.class_names};
  });
}

void sldcnn_eval_destroy(sldcnn_eval* eval) { delete eval; }

sldcnn_status sldcnn_eval_error_rate(const sldcnn_eval* eval, double* error_rate) {
  if (!eval || !error_rate) return null_arg("eval/error_rate");
  return guarded([&] {
    const auto total = eval->matrix.total();
    if (total == 0) throw sldcnn::DataError("evaluation has no samples");
    *error_rate = 1.0 - static_cast<double>(eval->matrix.trace()) / static_cast<double>(total);
  });
}

sldcnn_status sldcnn_eval_write_confusion(const sldcnn_eval* eval, const char* path) {
  if (!eval || !path) return null_arg("eval/path");
  return guarded([&] { sldcnn::write_confusion(eval->matrix, eval->class_names, path); });
}

sldcnn_status sldcnn_eval_read_confusion(const char* path, sldcnn_eval** out) {
  if (!path || !out) return null_arg("path/out");
  return guarded([&] {
    auto* e = new sldcnn_eval{};
    try {
      e->matrix = sldcnn::read_confusion(path, &e->class_names);
    } catch (...) {
      delete e;
      throw;
    }
    *out = e;
  });
}

sldcnn_status sldcnn_eval_report(const sldcnn_eval* eval, size_t top_n, char** text) {
  if (!eval || !text) return null_arg("eval/text");
  return guarded([&] {
    const auto pairs = sldcnn::top_confusions(eval->matrix, top_n);
    std::string out = "Most frequent confusions\n";
    out += sldcnn::format_top_confusions(pairs, eval->class_names);
    out += "\nPer-class accuracy\n";
    out += sldcnn::format_per_class_accuracy(eval->matrix, eval->class_names);
    *text = dup_string(out);
  });
}

sldcnn_status sldcnn_gradcheck(const char* arch, uint32_t height, uint32_t width, uint64_t seed,
                               const char* fault_layer, int* passed, char** report) {
  if (!arch || !passed) return null_arg("arch/passed");
  return guarded([&] {
    sldcnn::GradcheckOptions opt;
    opt.seed = seed;
    if (fault_layer) {
      const std::string f = fault_layer;
      if (f == "conv") opt.fault = sldcnn::LayerKind::kConv;
      else if (f == "pool") opt.fault = sldcnn::LayerKind::kPool;
      else if (f == "fc") opt.fault = sldcnn::LayerKind::kFC;
      else if (f == "softmax") opt.fault = sldcnn::LayerKind::kSoftmax;
      else throw sldcnn::UsageError("unknown fault layer '" + f + "'");
    }
    sldcnn::ArchSpec spec;
    try {
      spec = sldcnn::make_arch(arch, {height, width, 1});
    } catch (const sldcnn::Error& e) {
      throw sldcnn::UsageError(std::string("arch: ") + e.what());
    }
    const sldcnn::GradcheckReport r = sldcnn::gradcheck(spec, opt);
    *passed = r.passed ? 1 : 0;
    if (report) *report = dup_string(r.render());
  });
}

}  // extern "C"
