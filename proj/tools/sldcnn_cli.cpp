// Command-line front end. Talks to the library exclusively through the C API.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "sldcnn/sldcnn.h"

namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kFailure = 1, kUsage = 2, kDiverged = 3, kIo = 4 };

struct Failure {
  sldcnn_status status;
  std::string message;
};

int exit_code(sldcnn_status s) {
  switch (s) {
    case SLDCNN_OK: return kOk;
    case SLDCNN_ERR_USAGE:
    case SLDCNN_ERR_PARSE:
    case SLDCNN_ERR_CONFIG:
    case SLDCNN_ERR_RANGE: return kUsage;
    case SLDCNN_ERR_NUMERIC: return kDiverged;
    case SLDCNN_ERR_IO:
    case SLDCNN_ERR_FORMAT:
    case SLDCNN_ERR_DATA:
    case SLDCNN_ERR_LABEL: return kIo;
    default: return kFailure;
  }
}

void check(sldcnn_status s) {
  if (s != SLDCNN_OK) throw Failure{s, sldcnn_last_error()};
}

std::string take(char* s) {
  std::string out = s ? s : "";
  sldcnn_string_free(s);
  return out;
}

template <typename T, void (*Destroy)(T*)>
struct Deleter {
  void operator()(T* p) const { Destroy(p); }
};
using Config = std::unique_ptr<sldcnn_config, Deleter<sldcnn_config, sldcnn_config_destroy>>;
using Data = std::unique_ptr<sldcnn_data, Deleter<sldcnn_data, sldcnn_data_destroy>>;
using Model = std::unique_ptr<sldcnn_model, Deleter<sldcnn_model, sldcnn_model_destroy>>;
using Run = std::unique_ptr<sldcnn_run, Deleter<sldcnn_run, sldcnn_run_destroy>>;
using Eval = std::unique_ptr<sldcnn_eval, Deleter<sldcnn_eval, sldcnn_eval_destroy>>;

Config new_config() {
  sldcnn_config* c = nullptr;
  check(sldcnn_config_create(&c));
  return Config(c);
}

std::string get(const sldcnn_config* c, const char* key) {
  char* v = nullptr;
  check(sldcnn_config_get(c, key, &v));
  return take(v);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Failure{SLDCNN_ERR_IO, "cannot write '" + path.string() + "'"};
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Failure{SLDCNN_ERR_IO, "cannot create '" + dir.string() + "': " + ec.message()};
}

// Flags that map one-to-one onto configuration keys.
struct KeyOption {
  const char* key;
  const char* flag;
  const char* help;
  bool is_switch = false;
};

const std::vector<KeyOption>& data_keys() {
  static const std::vector<KeyOption> k = {
      {"data", "--data", "corpus root holding train/ and test/ class directories"},
      {"synth", "--synth", "use the synthetic glyph corpus instead of --data", true},
      {"synth.classes", "--synth-classes", "synthetic classes"},
      {"synth.per_class", "--synth-per-class", "synthetic samples per class (train + test)"},
      {"synth.extent", "--synth-extent", "synthetic image side length"},
      {"synth.noise", "--synth-noise", "synthetic pixel noise (fraction of full scale)"},
      {"synth.seed", "--synth-seed", "synthetic corpus seed"},
      {"synth.test_fraction", "--synth-test-fraction", "fraction of each class held out"},
      {"size", "--size", "network input side length"},
      {"resize", "--resize", "bilinear | nearest"},
      {"standardize", "--standardize", "global | per-image"},
      {"invert", "--invert", "invert intensities before standardizing", true},
  };
  return k;
}

const std::vector<KeyOption>& train_keys() {
  static const std::vector<KeyOption> k = {
      {"mode", "--mode", "sldcnn | dcnn"},
      {"arch", "--arch", "architecture, e.g. 64C4-4P2-64C4-4P2-64C4-4P2-1500FC-171SM"},
      {"setup", "--setup", "iteration preset: 1 (10/20/50) or 2 (7/7/28)"},
      {"batch_size", "--batch-size", "mini-batch size"},
      {"per_layer_iters", "--per-layer-iters", "epochs per layerwise phase"},
      {"fine_tune_iters", "--fine-tune-iters", "epochs of final fine-tuning"},
      {"dcnn_iters", "--dcnn-iters", "epochs of plain DCNN training"},
      {"lrate1", "--lrate1", "initial rate of layerwise and DCNN phases"},
      {"lrate2", "--lrate2", "initial rate of fine-tuning"},
      {"gamma", "--gamma", "RMSProp decay"},
      {"epsilon", "--epsilon", "RMSProp denominator offset"},
      {"final_fraction", "--final-fraction", "rate at the end of a phase, relative to its start"},
      {"decay_unit", "--decay-unit", "epoch | batch"},
      {"seed", "--seed", "initialization and shuffling seed"},
      {"freeze_earlier", "--freeze-earlier", "layerwise phases update only the newest block", true},
      {"init_scale", "--init-scale", "multiplier on the initialization range"},
      {"threads", "--threads", "worker threads per batch (default: $SLDCNN_THREADS or 1)"},
  };
  return k;
}

// Collects the flag values of one subcommand.
struct KeyFlags {
  std::map<std::string, std::string> values;
  std::map<std::string, bool> switches;
  std::string config_file;

  void add(CLI::App* app, const std::vector<KeyOption>& keys) {
    for (const KeyOption& k : keys) {
      if (k.is_switch) {
        app->add_flag(k.flag, switches[k.key], k.help);
      } else {
        app->add_option(k.flag, values[k.key], k.help);
      }
    }
  }

  // Flags first, then the file for anything not given on the command line.
  Config build(CLI::App* app, const std::vector<KeyOption>& keys) const {
    Config c = new_config();
    for (const KeyOption& k : keys) {
      if (app->count(k.flag) == 0) continue;
      const std::string v = k.is_switch ? "true" : values.at(k.key);
      check(sldcnn_config_set(c.get(), k.key, v.c_str()));
    }
    if (!config_file.empty()) check(sldcnn_config_load_file(c.get(), config_file.c_str(), 0));
    return c;
  }
};

std::vector<KeyOption> all_keys() {
  std::vector<KeyOption> k = data_keys();
  k.insert(k.end(), train_keys().begin(), train_keys().end());
  return k;
}

Data load_data(const sldcnn_config* c) {
  sldcnn_data* d = nullptr;
  check(sldcnn_data_load(c, &d));
  return Data(d);
}

std::string format_record(const sldcnn_epoch_record& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "%-9s epoch %3u  loss %.6g  train_error %.4f  test_error %.4f  lr %.6g  %.0f ms",
                r.phase, r.epoch, r.train_loss, r.train_error, r.test_error, r.lr, r.wall_ms);
  return buf;
}

struct RunOutcome {
  Run run;
  Model model;
  double final_test_error = 0;
};

struct Progress {
  std::ofstream* log;
  std::string prefix;
  bool echo;
};

void on_epoch(const sldcnn_epoch_record* r, void* user) {
  auto* p = static_cast<Progress*>(user);
  const std::string line = p->prefix + format_record(*r);
  *p->log << line << '\n';
  p->log->flush();
  if (p->echo) std::cout << line << std::endl;
}

// Trains per `config` and fills `dir` with the run artifacts.
RunOutcome run_training(const sldcnn_config* config, const sldcnn_data* data, const fs::path& dir,
                        const std::string& prefix, bool echo) {
  make_dir(dir);
  write_text(dir / "config.resolved", [&] {
    char* t = nullptr;
    check(sldcnn_config_render(config, &t));
    return take(t);
  }());
  std::ofstream log(dir / "log.txt");
  if (!log) throw Failure{SLDCNN_ERR_IO, "cannot write '" + (dir / "log.txt").string() + "'"};
  size_t n_train = 0, n_test = 0, classes = 0, extent = 0;
  check(sldcnn_data_info(data, &n_train, &n_test, &classes, &extent));
  log << "train " << n_train << "  test " << n_test << "  classes " << classes << "  input "
      << extent << "x" << extent << '\n';

  Progress progress{&log, prefix, echo};
  sldcnn_model* m = nullptr;
  sldcnn_run* r = nullptr;
  const sldcnn_status s = sldcnn_train(config, data, on_epoch, &progress, &m, &r);
  if (s != SLDCNN_OK) {
    const std::string msg = sldcnn_last_error();
    log << "error: " << msg << '\n';
    throw Failure{s, msg};
  }
  RunOutcome out{Run(r), Model(m)};
  check(sldcnn_run_write_metrics(out.run.get(), (dir / "metrics.csv").c_str()));
  check(sldcnn_model_save(out.model.get(), (dir / "model.ckpt").c_str()));

  sldcnn_eval* e = nullptr;
  check(sldcnn_evaluate(out.model.get(), data, SLDCNN_SPLIT_TEST, &e));
  Eval eval(e);
  check(sldcnn_eval_write_confusion(eval.get(), (dir / "confusion.csv").c_str()));
  check(sldcnn_eval_error_rate(eval.get(), &out.final_test_error));

  char* phases = nullptr;
  check(sldcnn_model_phase_log(out.model.get(), &phases));
  log << "phases\n" << take(phases);
  char buf[64];
  std::snprintf(buf, sizeof buf, "final test_error %.6g\n", out.final_test_error);
  log << buf;
  return out;
}

int cmd_train(CLI::App* app, const KeyFlags& flags, const std::string& out_dir) {
  Config c = flags.build(app, all_keys());
  check(sldcnn_config_resolve(c.get()));
  Data data = load_data(c.get());
  const RunOutcome r = run_training(c.get(), data.get(), out_dir, "", true);
  std::printf("final test_error %.6g\nrun directory: %s\n", r.final_test_error, out_dir.c_str());
  return kOk;
}

bool has_key(const sldcnn_config* c, const char* key) {
  char* v = nullptr;
  if (sldcnn_config_get(c, key, &v) != SLDCNN_OK) return false;
  sldcnn_string_free(v);
  return true;
}

Config clone_as(const sldcnn_config* c, const char* mode) {
  sldcnn_config* out = nullptr;
  check(sldcnn_config_clone(c, &out));
  Config cfg(out);
  check(sldcnn_config_set(cfg.get(), "mode", mode));
  return cfg;
}

int cmd_compare(CLI::App* app, const KeyFlags& flags, const std::string& out_dir, bool parallel) {
  if (app->count("--mode")) throw Failure{SLDCNN_ERR_USAGE, "compare runs both modes; drop --mode"};
  Config base = flags.build(app, all_keys());
  // Unless a seed is given, the two modes use different seeds.
  const bool pinned = has_key(base.get(), "seed");
  Config dcnn = clone_as(base.get(), "dcnn");
  Config sl = clone_as(base.get(), "sldcnn");
  if (!pinned) {
    check(sldcnn_config_set(dcnn.get(), "seed", "1"));
    check(sldcnn_config_set(sl.get(), "seed", "2"));
  }
  check(sldcnn_config_resolve(dcnn.get()));
  check(sldcnn_config_resolve(sl.get()));
  Data data = load_data(sl.get());
  make_dir(out_dir);

  RunOutcome rd, rs;
  const fs::path root(out_dir);
  if (parallel) {
    std::optional<Failure> fd, fs_;
    auto guarded = [](auto&& fn, std::optional<Failure>& err) {
      try {
        fn();
      } catch (const Failure& f) {
        err = f;
      }
    };
    std::thread t([&] {
      guarded([&] { rd = run_training(dcnn.get(), data.get(), root / "dcnn", "[dcnn]   ", false); },
              fd);
    });
    guarded([&] { rs = run_training(sl.get(), data.get(), root / "sldcnn", "[sldcnn] ", false); },
            fs_);
    t.join();
    if (fd) throw *fd;
    if (fs_) throw *fs_;
  } else {
    rd = run_training(dcnn.get(), data.get(), root / "dcnn", "[dcnn]   ", true);
    rs = run_training(sl.get(), data.get(), root / "sldcnn", "[sldcnn] ", true);
  }

  const size_t nd = sldcnn_run_size(rd.run.get());
  const size_t ns = sldcnn_run_size(rs.run.get());
  if (nd != ns) {
    std::cerr << "warning: budgets differ (dcnn " << nd << " epochs, sldcnn " << ns << ")\n";
  }
  std::string table = "epoch,dcnn_phase,dcnn_test_error,sldcnn_phase,sldcnn_test_error\n";
  char buf[256];
  for (size_t i = 0; i < std::max(nd, ns); ++i) {
    sldcnn_epoch_record a{}, b{};
    std::string da = ",", sb = ",";
    if (i < nd) {
      check(sldcnn_run_record(rd.run.get(), i, &a));
      std::snprintf(buf, sizeof buf, "%s,%.6g", a.phase, a.test_error);
      da = buf;
    }
    if (i < ns) {
      check(sldcnn_run_record(rs.run.get(), i, &b));
      std::snprintf(buf, sizeof buf, "%s,%.6g", b.phase, b.test_error);
      sb = buf;
    }
    table += std::to_string(i + 1) + "," + da + "," + sb + "\n";
  }
  write_text(root / "compare.csv", table);
  std::cout << table;
  std::snprintf(buf, sizeof buf, "final test_error  dcnn %.6g  sldcnn %.6g\n", rd.final_test_error,
                rs.final_test_error);
  std::cout << buf;
  write_text(root / "summary.txt", buf);
  return kOk;
}

int cmd_gradcheck(const std::string& arch, uint32_t size, const std::vector<uint64_t>& seeds,
                  const std::string& fault) {
  bool all = true;
  for (uint64_t seed : seeds) {
    int passed = 0;
    char* report = nullptr;
    check(sldcnn_gradcheck(arch.c_str(), size, size, seed, fault.empty() ? nullptr : fault.c_str(),
                           &passed, &report));
    std::cout << "seed " << seed << '\n' << take(report);
    all = all && passed;
  }
  std::cout << (all ? "gradcheck passed\n" : "gradcheck FAILED\n");
  return all ? kOk : kFailure;
}

sldcnn_split parse_split(const std::string& s) {
  if (s == "test") return SLDCNN_SPLIT_TEST;
  if (s == "train") return SLDCNN_SPLIT_TRAIN;
  throw Failure{SLDCNN_ERR_USAGE, "unknown split '" + s + "' (expected train or test)"};
}

int cmd_eval(CLI::App* app, const KeyFlags& flags, const std::string& run_dir,
             std::string model_path, const std::string& split, const std::string& confusion_out) {
  Config c = flags.build(app, data_keys());
  if (!run_dir.empty()) {
    const fs::path cfg = fs::path(run_dir) / "config.resolved";
    // Only the data-related keys of the run matter here.
    Config run = new_config();
    check(sldcnn_config_load_file(run.get(), cfg.c_str(), 1));
    for (const KeyOption& k : data_keys()) {
      if (has_key(c.get(), k.key)) continue;
      check(sldcnn_config_set(c.get(), k.key, get(run.get(), k.key).c_str()));
    }
    if (model_path.empty()) model_path = (fs::path(run_dir) / "model.ckpt").string();
  }
  if (model_path.empty()) throw Failure{SLDCNN_ERR_USAGE, "eval needs --run or --model"};
  sldcnn_model* m = nullptr;
  check(sldcnn_model_load(model_path.c_str(), &m));
  Model model(m);
  if (!has_key(c.get(), "size")) {
    uint32_t h = 0, w = 0;
    check(sldcnn_model_input(model.get(), &h, &w, nullptr));
    if (h != w) throw Failure{SLDCNN_ERR_USAGE, "model input is not square; pass --size"};
    check(sldcnn_config_set(c.get(), "size", std::to_string(h).c_str()));
  }
  check(sldcnn_config_resolve_data(c.get()));
  Data data = load_data(c.get());
  sldcnn_eval* e = nullptr;
  check(sldcnn_evaluate(model.get(), data.get(), parse_split(split), &e));
  Eval eval(e);
  double err = 0;
  check(sldcnn_eval_error_rate(eval.get(), &err));
  if (!confusion_out.empty()) check(sldcnn_eval_write_confusion(eval.get(), confusion_out.c_str()));
  std::printf("%s error_rate %.6g\n", split.c_str(), err);
  return kOk;
}

int cmd_synth(CLI::App* app, const KeyFlags& flags, const std::string& out_dir) {
  Config c = flags.build(app, data_keys());
  check(sldcnn_config_set(c.get(), "synth", "true"));
  check(sldcnn_config_resolve_data(c.get()));
  check(sldcnn_synth_write(c.get(), out_dir.c_str()));
  std::printf("synthetic corpus written to %s\n", out_dir.c_str());
  return kOk;
}

int cmd_report(const std::string& run_dir, size_t top) {
  const fs::path dir(run_dir);
  sldcnn_eval* e = nullptr;
  check(sldcnn_eval_read_confusion((dir / "confusion.csv").c_str(), &e));
  Eval eval(e);
  double err = 0;
  check(sldcnn_eval_error_rate(eval.get(), &err));
  char* text = nullptr;
  check(sldcnn_eval_report(eval.get(), top, &text));
  std::printf("test error_rate %.6g\n\n", err);
  std::cout << take(text);
  if (fs::exists(dir / "metrics.csv")) {
    sldcnn_run* r = nullptr;
    check(sldcnn_run_read_metrics((dir / "metrics.csv").c_str(), &r));
    Run run(r);
    std::cout << "\nEpochs recorded: " << sldcnn_run_size(run.get()) << '\n';
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Supervised layerwise training of deep convolutional networks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", sldcnn_version());

  KeyFlags train_flags, compare_flags, eval_flags, synth_flags;
  std::string train_out, compare_out, eval_run, eval_model, eval_split = "test", eval_confusion,
      synth_out, report_run;
  bool parallel = false;
  size_t report_top = 10;
  std::string gc_arch = "2C3-2P2-8FC-4SM", gc_fault;
  uint32_t gc_size = 8;
  std::vector<uint64_t> gc_seeds{1, 2, 3};

  CLI::App* train = app.add_subcommand("train", "train one model and write a run directory");
  train->add_option("--config", train_flags.config_file, "key = value file; flags take precedence")
      ->check(CLI::ExistingFile);
  train->add_option("--out", train_out, "run directory")->required();
  train_flags.add(train, all_keys());

  CLI::App* compare = app.add_subcommand("compare", "train dcnn and sldcnn and merge their curves");
  compare->add_option("--config", compare_flags.config_file, "key = value file")
      ->check(CLI::ExistingFile);
  compare->add_option("--out", compare_out, "output directory")->required();
  compare->add_flag("--parallel", parallel, "run both trainings concurrently");
  compare_flags.add(compare, all_keys());

  CLI::App* gradcheck = app.add_subcommand("gradcheck", "check analytic gradients numerically");
  gradcheck->add_option("--arch", gc_arch, "architecture (at most 10000 parameters)");
  gradcheck->add_option("--size", gc_size, "input side length");
  gradcheck->add_option("--seeds", gc_seeds, "random seeds");
  gradcheck->add_option("--fault", gc_fault, "corrupt one layer type: conv | pool | fc | softmax");

  CLI::App* eval = app.add_subcommand("eval", "score a checkpoint on a corpus split");
  eval->add_option("--run", eval_run, "run directory (model and data settings)");
  eval->add_option("--model", eval_model, "checkpoint file");
  eval->add_option("--split", eval_split, "train | test");
  eval->add_option("--confusion", eval_confusion, "write the confusion matrix here");
  eval->add_option("--config", eval_flags.config_file, "key = value file")->check(CLI::ExistingFile);
  eval_flags.add(eval, data_keys());

  CLI::App* synth = app.add_subcommand("synth", "write the synthetic corpus as PGM files");
  synth->add_option("--out", synth_out, "corpus root")->required();
  synth->add_option("--config", synth_flags.config_file, "key = value file")
      ->check(CLI::ExistingFile);
  synth_flags.add(synth, data_keys());

  CLI::App* report = app.add_subcommand("report", "summarize the confusions of a run");
  report->add_option("--run", report_run, "run directory")->required();
  report->add_option("--top", report_top, "number of confusion pairs")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*train) return cmd_train(train, train_flags, train_out);
    if (*compare) return cmd_compare(compare, compare_flags, compare_out, parallel);
    if (*gradcheck) return cmd_gradcheck(gc_arch, gc_size, gc_seeds, gc_fault);
    if (*eval) return cmd_eval(eval, eval_flags, eval_run, eval_model, eval_split, eval_confusion);
    if (*synth) return cmd_synth(synth, synth_flags, synth_out);
    if (*report) return cmd_report(report_run, report_top);
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << " (" << sldcnn_status_name(f.status) << ")\n";
    return exit_code(f.status);
  }
  return kUsage;
}
