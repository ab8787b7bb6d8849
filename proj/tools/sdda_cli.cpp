// Command-line front end for the sdda shared library. Talks to the core
// exclusively through the C API; every command materializes its resolved
// configuration into a run manifest so that `sdda rerun` can reproduce the
// outputs from the same inputs.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "sdda/sdda.h"

namespace {

[[noreturn]] void die(const std::string& context) {
  std::cerr << "error: " << context << ": " << sdda_last_error() << "\n";
  std::exit(1);
}

void check(sdda_status st, const std::string& context) {
  if (st != SDDA_OK) {
    std::cerr << "error: " << context << ": " << sdda_status_name(st) << ": "
              << sdda_last_error() << "\n";
    std::exit(1);
  }
}

std::string take_string(char* s) {
  std::string out = s ? s : "";
  sdda_string_free(s);
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) {
    std::cerr << "error: cannot open " << path << "\n";
    std::exit(1);
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out.good()) {
    std::cerr << "error: cannot write " << path << "\n";
    std::exit(1);
  }
  out << content;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    std::cerr << "error: cannot create directory " << dir << ": " << ec.message() << "\n";
    std::exit(1);
  }
}

std::string digest_of(const std::string& path) {
  char* hex = nullptr;
  check(sdda_file_digest(path.c_str(), &hex), "digest " + path);
  return take_string(hex);
}

// Minimal reader for the "[section]" / "key = value" text the library and
// the manifests use.
class KvText {
 public:
  static KvText parse(const std::string& text) {
    KvText kv;
    std::istringstream in(text);
    std::string line, section;
    while (std::getline(in, line)) {
      const size_t hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const auto trim = [](std::string s) {
        const size_t a = s.find_first_not_of(" \t\r\n");
        if (a == std::string::npos) return std::string();
        const size_t b = s.find_last_not_of(" \t\r\n");
        return s.substr(a, b - a + 1);
      };
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[' && line.back() == ']') {
        section = trim(line.substr(1, line.size() - 2));
        continue;
      }
      const size_t eq = line.find('=');
      if (eq == std::string::npos) continue;
      kv.values_[section + "/" + trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
  }

  std::string get(const std::string& section, const std::string& key,
                  const std::string& fallback = "") const {
    auto it = values_.find(section + "/" + key);
    return it == values_.end() ? fallback : it->second;
  }
  bool has(const std::string& section, const std::string& key) const {
    return values_.count(section + "/" + key) > 0;
  }

 private:
  std::map<std::string, std::string> values_;
};

// Collects key = value overrides per section; appended after any config
// file content so that flags win.
class ConfigBuilder {
 public:
  explicit ConfigBuilder(std::string base_text = "") : base_(std::move(base_text)) {}

  void set(const std::string& section, const std::string& key, const std::string& value) {
    overrides_.emplace_back(section, key + " = " + value);
  }
  void set_if(bool cond, const std::string& section, const std::string& key,
              const std::string& value) {
    if (cond) set(section, key, value);
  }

  std::string text() const {
    std::string out = base_;
    out += "\n";
    for (const auto& [section, line] : overrides_) {
      out += "[" + section + "]\n" + line + "\n";
    }
    return out;
  }

 private:
  std::string base_;
  std::vector<std::pair<std::string, std::string>> overrides_;
};

struct ManifestInput {
  std::string key;
  std::string path;
};

void write_manifest(const std::string& out_dir, const std::string& command,
                    const std::vector<ManifestInput>& inputs,
                    const std::vector<std::pair<std::string, std::string>>& outputs,
                    const std::string& extra_sections, const std::string& resolved_config) {
  std::ostringstream m;
  m << "[run]\n";
  m << "command = " << command << "\n";
  m << "version = " << sdda_version() << "\n\n";
  m << "[inputs]\n";
  m << "count = " << inputs.size() << "\n";
  for (size_t i = 0; i < inputs.size(); ++i) {
    m << inputs[i].key << " = " << inputs[i].path << "\n";
    m << inputs[i].key << "_digest = " << digest_of(inputs[i].path) << "\n";
  }
  m << "\n[outputs]\n";
  for (const auto& [k, v] : outputs) m << k << " = " << v << "\n";
  m << "\n";
  if (!extra_sections.empty()) m << extra_sections << "\n";
  m << resolved_config;
  write_file(out_dir + "/manifest.txt", m.str());
}

void verify_manifest_inputs(const KvText& manifest) {
  const int count = std::stoi(manifest.get("inputs", "count", "0"));
  (void)count;
  // Re-check every recorded digest; refusing to rerun on changed inputs is
  // what makes "rerun reproduces the metrics" a meaningful contract.
  for (const char* key : {"in", "source", "target", "data", "checkpoint"}) {
    if (!manifest.has("inputs", key)) continue;
    const std::string path = manifest.get("inputs", key);
    const std::string want = manifest.get("inputs", std::string(key) + "_digest");
    const std::string got = digest_of(path);
    if (!want.empty() && want != got) {
      std::cerr << "error: input '" << key << "' (" << path
                << ") changed since the manifest was written: digest " << got
                << " != " << want << "\n";
      std::exit(1);
    }
  }
  for (int i = 0;; ++i) {
    const std::string key = "in_" + std::to_string(i);
    if (!manifest.has("inputs", key)) break;
    const std::string path = manifest.get("inputs", key);
    const std::string want = manifest.get("inputs", key + "_digest");
    if (!want.empty() && want != digest_of(path)) {
      std::cerr << "error: input " << path << " changed since the manifest was written\n";
      std::exit(1);
    }
  }
}

sdda_trialset* load_set(const std::string& path) {
  sdda_trialset* set = nullptr;
  check(sdda_trialset_read(path.c_str(), &set), "read " + path);
  return set;
}

// ---------------------------------------------------------------------------
// command bodies, shared between the flag path and `rerun`

int run_synth(const std::string& config_text, const std::string& out_dir) {
  ensure_dir(out_dir);
  sdda_trialset *source = nullptr, *target = nullptr;
  char* resolved = nullptr;
  check(sdda_synth_generate(config_text.c_str(), &source, &target, &resolved), "synth");
  const std::string resolved_text = take_string(resolved);
  check(sdda_trialset_write(source, (out_dir + "/source.trl").c_str()), "write source");
  check(sdda_trialset_write(target, (out_dir + "/target.trl").c_str()), "write target");
  sdda_trialset_free(source);
  sdda_trialset_free(target);
  write_manifest(out_dir, "synth", {},
                 {{"source", "source.trl"}, {"target", "target.trl"}}, "", resolved_text);
  std::cout << "wrote " << out_dir << "/source.trl and target.trl\n";
  return 0;
}

int run_preprocess(const std::string& in_path, const std::string& config_text,
                   const std::string& out_dir) {
  ensure_dir(out_dir);
  sdda_trialset* in = load_set(in_path);
  sdda_trialset* out = nullptr;
  char *diag = nullptr, *resolved = nullptr;
  check(sdda_preprocess(in, config_text.c_str(), &out, &diag, &resolved), "preprocess");
  sdda_trialset_free(in);
  const std::string diag_text = take_string(diag);
  const std::string resolved_text = take_string(resolved);
  check(sdda_trialset_write(out, (out_dir + "/preprocessed.trl").c_str()),
        "write preprocessed set");
  sdda_trialset_free(out);
  write_manifest(out_dir, "preprocess", {{"in", in_path}},
                 {{"preprocessed", "preprocessed.trl"}}, diag_text, resolved_text);
  std::cout << diag_text;
  std::cout << "wrote " << out_dir << "/preprocessed.trl\n";
  return 0;
}

int run_train(const std::string& source_path, const std::string& target_path, bool vanilla,
              const std::string& config_text, const std::string& out_dir) {
  ensure_dir(out_dir);
  sdda_trialset* source = load_set(source_path);
  sdda_trialset* target = target_path.empty() ? nullptr : load_set(target_path);
  if (!vanilla && !target) {
    std::cerr << "error: train needs --target (or --vanilla)\n";
    return 1;
  }
  sdda_model* model = nullptr;
  char *record = nullptr, *trace = nullptr, *resolved = nullptr;
  int diverged = 0;
  check(sdda_train(source, target, config_text.c_str(), vanilla ? 1 : 0, &model, &record,
                   &trace, &resolved, &diverged),
        "train");
  sdda_trialset_free(source);
  if (target) sdda_trialset_free(target);

  const std::string record_text = take_string(record);
  const std::string trace_text = take_string(trace);
  const std::string resolved_text = take_string(resolved);
  check(sdda_model_save(model, (out_dir + "/model.ckpt").c_str()), "save checkpoint");
  char* params_csv = nullptr;
  check(sdda_model_param_report(model, &params_csv), "parameter report");
  sdda_model_free(model);
  write_file(out_dir + "/record.txt", record_text);
  write_file(out_dir + "/trace.csv", trace_text);
  write_file(out_dir + "/param_counts.csv", take_string(params_csv));

  std::vector<ManifestInput> inputs{{"source", source_path}};
  if (!target_path.empty()) inputs.push_back({"target", target_path});
  write_manifest(out_dir, "train", inputs,
                 {{"checkpoint", "model.ckpt"},
                  {"record", "record.txt"},
                  {"trace", "trace.csv"},
                  {"param_counts", "param_counts.csv"}},
                 "", resolved_text);
  std::cout << record_text;
  if (diverged) {
    std::cerr << "error: training diverged (see record.txt)\n";
    return 1;
  }
  std::cout << "wrote " << out_dir << "/model.ckpt\n";
  return 0;
}

int run_eval(const std::string& checkpoint_path, const std::string& data_path,
             std::string method, std::string participant, const std::string& out_dir) {
  ensure_dir(out_dir);
  sdda_model* model = nullptr;
  check(sdda_model_load(checkpoint_path.c_str(), &model), "load checkpoint");
  sdda_trialset* data = load_set(data_path);
  if (participant.empty()) {
    int has = 0;
    uint32_t id = 0;
    check(sdda_trialset_provenance(data, &has, &id), "provenance");
    participant = has ? ("p" + std::to_string(id)) : "p0";
  }
  if (method.empty()) method = "model";
  double acc = 0, kap = 0;
  char *metrics = nullptr, *confusion = nullptr;
  check(sdda_evaluate(model, data, &acc, &kap, &metrics, &confusion), "evaluate");
  sdda_model_free(model);
  sdda_trialset_free(data);
  write_file(out_dir + "/metrics.csv", take_string(metrics));
  write_file(out_dir + "/confusion.csv", take_string(confusion));
  {
    char buf[256];
    std::snprintf(buf, sizeof buf, "method,participant,accuracy,kappa\n%s,%s,%.17g,%.17g\n",
                  method.c_str(), participant.c_str(), acc, kap);
    write_file(out_dir + "/results.csv", buf);
  }
  std::ostringstream extra;
  extra << "[eval]\nmethod = " << method << "\nparticipant = " << participant << "\n";
  write_manifest(out_dir, "eval",
                 {{"checkpoint", checkpoint_path}, {"data", data_path}},
                 {{"metrics", "metrics.csv"},
                  {"confusion", "confusion.csv"},
                  {"results", "results.csv"}},
                 extra.str(), "");
  std::printf("accuracy %.4f  kappa %.4f\n", acc, kap);
  return 0;
}

int run_gridsearch(const std::string& source_path, const std::string& target_path,
                   const std::string& config_text, const std::string& out_dir) {
  ensure_dir(out_dir);
  sdda_trialset* source = load_set(source_path);
  sdda_trialset* target = load_set(target_path);
  char *grid = nullptr, *resolved = nullptr;
  double best_l1 = 0, best_l2 = 0;
  check(sdda_grid_search(source, target, config_text.c_str(), &grid, &best_l1, &best_l2,
                         &resolved),
        "gridsearch");
  sdda_trialset_free(source);
  sdda_trialset_free(target);
  write_file(out_dir + "/grid.csv", take_string(grid));
  {
    char buf[128];
    std::snprintf(buf, sizeof buf, "best_lambda1 = %.17g\nbest_lambda2 = %.17g\n", best_l1,
                  best_l2);
    write_file(out_dir + "/best.txt", buf);
  }
  write_manifest(out_dir, "gridsearch",
                 {{"source", source_path}, {"target", target_path}},
                 {{"grid", "grid.csv"}, {"best", "best.txt"}}, "", take_string(resolved));
  std::printf("best lambda1 %.4g lambda2 %.4g\n", best_l1, best_l2);
  return 0;
}

int run_export(const std::string& checkpoint_path, const std::string& data_path,
               const std::string& domain, const std::string& out_dir) {
  ensure_dir(out_dir);
  sdda_model* model = nullptr;
  check(sdda_model_load(checkpoint_path.c_str(), &model), "load checkpoint");
  sdda_trialset* data = load_set(data_path);
  char* csv = nullptr;
  check(sdda_export_embeddings(model, data, domain.c_str(), &csv), "export embeddings");
  sdda_model_free(model);
  sdda_trialset_free(data);
  write_file(out_dir + "/embeddings.csv", take_string(csv));
  std::ostringstream extra;
  extra << "[export]\ndomain = " << domain << "\n";
  write_manifest(out_dir, "export-embeddings",
                 {{"checkpoint", checkpoint_path}, {"data", data_path}},
                 {{"embeddings", "embeddings.csv"}}, extra.str(), "");
  std::cout << "wrote " << out_dir << "/embeddings.csv\n";
  return 0;
}

int run_report(const std::vector<std::string>& result_files, int classes,
               const std::string& out_dir) {
  ensure_dir(out_dir);
  std::string rows = "method,participant,accuracy,kappa\n";
  for (const auto& f : result_files) {
    std::istringstream in(read_file(f));
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
      if (header) {
        header = false;
        continue;
      }
      if (!line.empty()) rows += line + "\n";
    }
  }
  char *csv = nullptr, *text = nullptr;
  check(sdda_report_tables(rows.c_str(), static_cast<uint32_t>(classes), &csv, &text),
        "report");
  const std::string text_s = take_string(text);
  write_file(out_dir + "/report.csv", take_string(csv));
  write_file(out_dir + "/report.txt", text_s);
  std::vector<ManifestInput> inputs;
  for (size_t i = 0; i < result_files.size(); ++i) {
    inputs.push_back({"in_" + std::to_string(i), result_files[i]});
  }
  std::ostringstream extra;
  extra << "[report]\nclasses = " << classes << "\n";
  write_manifest(out_dir, "report", inputs,
                 {{"report_csv", "report.csv"}, {"report_text", "report.txt"}},
                 extra.str(), "");
  std::cout << text_s;
  return 0;
}

int run_rerun(const std::string& manifest_path, const std::string& out_dir) {
  const std::string manifest_text = read_file(manifest_path);
  const KvText manifest = KvText::parse(manifest_text);
  verify_manifest_inputs(manifest);
  const std::string command = manifest.get("run", "command");
  // The manifest doubles as the command's config text: the library readers
  // pick their own sections and ignore the bookkeeping ones.
  if (command == "synth") return run_synth(manifest_text, out_dir);
  if (command == "preprocess") {
    return run_preprocess(manifest.get("inputs", "in"), manifest_text, out_dir);
  }
  if (command == "train") {
    const bool vanilla = manifest.get("train", "vanilla", "false") == "true";
    return run_train(manifest.get("inputs", "source"), manifest.get("inputs", "target"),
                     vanilla, manifest_text, out_dir);
  }
  if (command == "eval") {
    return run_eval(manifest.get("inputs", "checkpoint"), manifest.get("inputs", "data"),
                    manifest.get("eval", "method"), manifest.get("eval", "participant"),
                    out_dir);
  }
  if (command == "gridsearch") {
    return run_gridsearch(manifest.get("inputs", "source"),
                          manifest.get("inputs", "target"), manifest_text, out_dir);
  }
  if (command == "export-embeddings") {
    return run_export(manifest.get("inputs", "checkpoint"), manifest.get("inputs", "data"),
                      manifest.get("export", "domain", "unknown"), out_dir);
  }
  if (command == "report") {
    std::vector<std::string> files;
    for (int i = 0;; ++i) {
      const std::string key = "in_" + std::to_string(i);
      if (!manifest.has("inputs", key)) break;
      files.push_back(manifest.get("inputs", key));
    }
    return run_report(files, std::stoi(manifest.get("report", "classes", "2")), out_dir);
  }
  std::cerr << "error: manifest has unknown command '" << command << "'\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Siamese domain adaptation for cross-session time-series classification"};
  app.require_subcommand(1);

  // ---- synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic cross-session benchmark");
  std::string synth_config, synth_out;
  double synth_shift = -1;
  long long synth_seed = -1, synth_trials = -1, synth_channels = -1, synth_samples = -1,
            synth_classes = -1;
  synth->add_option("--config", synth_config, "config file with a [synth] section");
  synth->add_option("--out-dir", synth_out)->required();
  synth->add_option("--shift", synth_shift, "session shift strength");
  synth->add_option("--seed", synth_seed);
  synth->add_option("--trials", synth_trials, "trials per domain");
  synth->add_option("--channels", synth_channels);
  synth->add_option("--samples", synth_samples);
  synth->add_option("--classes", synth_classes);

  // ---- preprocess
  auto* prep = app.add_subcommand("preprocess", "filter, standardize, normalize and align");
  std::string prep_in, prep_out, prep_config;
  bool no_filter = false, no_ema = false, no_normalize = false, no_align = false;
  long long fir_order = -1;
  double band_low = -1, band_high = -1, ema_decay = -1;
  prep->add_option("--in", prep_in)->required();
  prep->add_option("--out-dir", prep_out)->required();
  prep->add_option("--config", prep_config);
  prep->add_flag("--no-filter", no_filter);
  prep->add_flag("--no-ema", no_ema);
  prep->add_flag("--no-normalize", no_normalize);
  prep->add_flag("--no-align", no_align);
  prep->add_option("--fir-order", fir_order);
  prep->add_option("--band-low", band_low);
  prep->add_option("--band-high", band_high);
  prep->add_option("--ema-decay", ema_decay);

  // ---- train
  auto* train = app.add_subcommand("train", "two-stage adaptation training");
  std::string train_source, train_target, train_out, train_config, train_arch,
      train_mmd_bandwidth;
  std::vector<std::string> ablate;
  bool vanilla = false;
  double lambda1 = -1, lambda2 = -1, eta = -1, val_fraction = -1, weight_decay = -1,
         center_rate = -1;
  long long seed = -1, batch = -1, epochs1 = -1, epochs2 = -1, patience = -1;
  train->add_option("--source", train_source)->required();
  train->add_option("--target", train_target);
  train->add_option("--out-dir", train_out)->required();
  train->add_option("--config", train_config);
  train->add_option("--model", train_arch, "eegnet | convnet");
  train->add_option("--lambda1", lambda1);
  train->add_option("--lambda2", lambda2);
  train->add_option("--eta", eta);
  train->add_option("--seed", seed);
  train->add_option("--batch", batch);
  train->add_option("--epochs1", epochs1, "max epochs, stage 1");
  train->add_option("--epochs2", epochs2, "max epochs, stage 2");
  train->add_option("--patience", patience);
  train->add_option("--val-fraction", val_fraction);
  train->add_option("--weight-decay", weight_decay);
  train->add_option("--center-rate", center_rate);
  train->add_option("--mmd-bandwidth", train_mmd_bandwidth, "'median' or a fixed sigma^2");
  train->add_option("--ablate", ablate, "no-pre | no-center | no-mmd (repeatable)");
  train->add_flag("--vanilla", vanilla, "single-branch baseline");

  // ---- eval
  auto* eval = app.add_subcommand("eval", "score a checkpoint on a labeled container");
  std::string eval_ckpt, eval_data, eval_out, eval_method, eval_participant;
  eval->add_option("--checkpoint", eval_ckpt)->required();
  eval->add_option("--data", eval_data)->required();
  eval->add_option("--out-dir", eval_out)->required();
  eval->add_option("--method", eval_method);
  eval->add_option("--participant", eval_participant);

  // ---- gridsearch
  auto* grid = app.add_subcommand("gridsearch", "trade-off grid over lambda1 x lambda2");
  std::string grid_source, grid_target, grid_out, grid_config, grid_arch;
  long long grid_seed = -1, grid_reps = -1, grid_epochs1 = -1, grid_epochs2 = -1,
            grid_patience = -1;
  grid->add_option("--source", grid_source)->required();
  grid->add_option("--target", grid_target, "labeled target session")->required();
  grid->add_option("--out-dir", grid_out)->required();
  grid->add_option("--config", grid_config);
  grid->add_option("--model", grid_arch);
  grid->add_option("--seed", grid_seed);
  grid->add_option("--reps", grid_reps, "repetitions per cell");
  grid->add_option("--epochs1", grid_epochs1);
  grid->add_option("--epochs2", grid_epochs2);
  grid->add_option("--patience", grid_patience);

  // ---- export-embeddings
  auto* exp = app.add_subcommand("export-embeddings", "write embedding rows as CSV");
  std::string exp_ckpt, exp_data, exp_out, exp_domain = "unknown";
  exp->add_option("--checkpoint", exp_ckpt)->required();
  exp->add_option("--data", exp_data)->required();
  exp->add_option("--out-dir", exp_out)->required();
  exp->add_option("--domain", exp_domain, "domain tag for the rows");

  // ---- report
  auto* report = app.add_subcommand("report", "aggregate result rows into tables");
  std::vector<std::string> report_in;
  std::string report_out;
  long long report_classes = 2;
  report->add_option("--in", report_in, "results.csv files")->required();
  report->add_option("--out-dir", report_out)->required();
  report->add_option("--classes", report_classes);

  // ---- rerun
  auto* rerun = app.add_subcommand("rerun", "re-execute a command from its manifest");
  std::string rerun_manifest, rerun_out;
  rerun->add_option("--manifest", rerun_manifest)->required();
  rerun->add_option("--out-dir", rerun_out)->required();

  CLI11_PARSE(app, argc, argv);

  if (synth->parsed()) {
    ConfigBuilder cfg(synth_config.empty() ? "" : read_file(synth_config));
    cfg.set_if(synth_shift >= 0, "synth", "shift", std::to_string(synth_shift));
    cfg.set_if(synth_seed >= 0, "synth", "seed", std::to_string(synth_seed));
    cfg.set_if(synth_trials >= 0, "synth", "trials_per_domain", std::to_string(synth_trials));
    cfg.set_if(synth_channels >= 0, "synth", "channels", std::to_string(synth_channels));
    cfg.set_if(synth_samples >= 0, "synth", "samples", std::to_string(synth_samples));
    cfg.set_if(synth_classes >= 0, "synth", "classes", std::to_string(synth_classes));
    return run_synth(cfg.text(), synth_out);
  }
  if (prep->parsed()) {
    ConfigBuilder cfg(prep_config.empty() ? "" : read_file(prep_config));
    cfg.set_if(no_filter, "preprocess", "filter", "false");
    cfg.set_if(no_ema, "preprocess", "ema", "false");
    cfg.set_if(no_normalize, "preprocess", "normalize", "false");
    cfg.set_if(no_align, "preprocess", "align", "false");
    cfg.set_if(fir_order >= 0, "preprocess", "fir_order", std::to_string(fir_order));
    cfg.set_if(band_low >= 0, "preprocess", "band_low_hz", std::to_string(band_low));
    cfg.set_if(band_high >= 0, "preprocess", "band_high_hz", std::to_string(band_high));
    cfg.set_if(ema_decay >= 0, "preprocess", "ema_decay", std::to_string(ema_decay));
    return run_preprocess(prep_in, cfg.text(), prep_out);
  }
  if (train->parsed()) {
    ConfigBuilder cfg(train_config.empty() ? "" : read_file(train_config));
    cfg.set_if(!train_arch.empty(), "train", "arch", train_arch);
    cfg.set_if(lambda1 >= 0, "train", "lambda1", std::to_string(lambda1));
    cfg.set_if(lambda2 >= 0, "train", "lambda2", std::to_string(lambda2));
    cfg.set_if(eta >= 0, "train", "eta", std::to_string(eta));
    cfg.set_if(seed >= 0, "train", "seed", std::to_string(seed));
    cfg.set_if(batch >= 0, "train", "batch_size", std::to_string(batch));
    cfg.set_if(epochs1 >= 0, "train", "max_epochs_stage1", std::to_string(epochs1));
    cfg.set_if(epochs2 >= 0, "train", "max_epochs_stage2", std::to_string(epochs2));
    cfg.set_if(patience >= 0, "train", "patience", std::to_string(patience));
    cfg.set_if(val_fraction >= 0, "train", "val_fraction", std::to_string(val_fraction));
    cfg.set_if(weight_decay >= 0, "train", "weight_decay", std::to_string(weight_decay));
    cfg.set_if(center_rate >= 0, "train", "center_rate", std::to_string(center_rate));
    cfg.set_if(!train_mmd_bandwidth.empty(), "train", "mmd_bandwidth", train_mmd_bandwidth);
    for (const std::string& a : ablate) {
      if (a == "no-pre") {
        cfg.set("train", "use_preproc_invariants", "false");
      } else if (a == "no-center") {
        cfg.set("train", "use_center", "false");
      } else if (a == "no-mmd") {
        cfg.set("train", "use_mmd", "false");
      } else {
        std::cerr << "error: unknown --ablate value '" << a << "'\n";
        return 1;
      }
    }
    return run_train(train_source, train_target, vanilla, cfg.text(), train_out);
  }
  if (eval->parsed()) {
    return run_eval(eval_ckpt, eval_data, eval_method, eval_participant, eval_out);
  }
  if (grid->parsed()) {
    ConfigBuilder cfg(grid_config.empty() ? "" : read_file(grid_config));
    cfg.set_if(!grid_arch.empty(), "train", "arch", grid_arch);
    cfg.set_if(grid_seed >= 0, "train", "seed", std::to_string(grid_seed));
    cfg.set_if(grid_reps >= 0, "train", "repetitions", std::to_string(grid_reps));
    cfg.set_if(grid_epochs1 >= 0, "train", "max_epochs_stage1", std::to_string(grid_epochs1));
    cfg.set_if(grid_epochs2 >= 0, "train", "max_epochs_stage2", std::to_string(grid_epochs2));
    cfg.set_if(grid_patience >= 0, "train", "patience", std::to_string(grid_patience));
    return run_gridsearch(grid_source, grid_target, cfg.text(), grid_out);
  }
  if (exp->parsed()) return run_export(exp_ckpt, exp_data, exp_domain, exp_out);
  if (report->parsed()) {
    return run_report(report_in, static_cast<int>(report_classes), report_out);
  }
  if (rerun->parsed()) return run_rerun(rerun_manifest, rerun_out);
  return 1;
}
