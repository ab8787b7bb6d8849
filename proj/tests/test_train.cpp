#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "core/errors.hpp"
#include "core/pipeline.hpp"
#include "core/rng.hpp"
#include "core/synth.hpp"
#include "core/train.hpp"

using namespace sdda;
using namespace sdda::train;
using sdda::data::SynthConfig;
using sdda::data::TrialSet;

namespace {

// Small raw sets for loop-level tests: no filtering, short trials.
std::pair<TrialSet, TrialSet> small_sets(uint64_t seed, int n = 48, int T = 128) {
  SynthConfig cfg;
  cfg.channels = 4;
  cfg.samples = T;
  cfg.trials_per_domain = n;
  cfg.rhythm_channels_per_class = 1;
  cfg.shift = 0.3;
  cfg.seed = seed;
  return sdda::data::generate_synthetic(cfg);
}

TrainConfig quick_cfg() {
  TrainConfig cfg;
  cfg.arch = "eegnet";
  cfg.max_epochs_stage1 = 15;
  cfg.max_epochs_stage2 = 5;
  cfg.patience = 15;
  cfg.seed = 5;
  return cfg;
}

std::vector<double> flat_params(const models::ParamStore& store) {
  std::vector<double> out;
  for (const auto& e : store.entries()) {
    out.insert(out.end(), e.value.vec().begin(), e.value.vec().end());
  }
  return out;
}

}  // namespace

TEST_CASE("switched-off adaptation reproduces the vanilla loop bit for bit") {
  auto [source, target] = small_sets(11);
  const auto spec = models::build_eegnet(source.E, source.T, source.C);
  TrainConfig cfg = quick_cfg();
  cfg.lambda1 = 0;
  cfg.lambda2 = 0;
  cfg.use_preproc_invariants = false;
  cfg.use_center = false;
  cfg.use_mmd = false;

  const auto siamese = train_siamese(source, target, spec, cfg);
  const auto vanilla = train_vanilla(source, spec, cfg);
  REQUIRE(siamese.record.trace.size() == vanilla.record.trace.size());
  for (size_t i = 0; i < siamese.record.trace.size(); ++i) {
    CHECK(siamese.record.trace[i].train_total == vanilla.record.trace[i].train_total);
    CHECK(siamese.record.trace[i].val_loss == vanilla.record.trace[i].val_loss);
  }
  CHECK(flat_params(siamese.params) == flat_params(vanilla.params));
}

TEST_CASE("training is bit-for-bit deterministic in the seed") {
  auto [source, target] = small_sets(12);
  const auto spec = models::build_eegnet(source.E, source.T, source.C);
  TrainConfig cfg = quick_cfg();
  cfg.max_epochs_stage1 = 8;
  cfg.max_epochs_stage2 = 3;
  const auto a = train_siamese(source, target, spec, cfg);
  const auto b = train_siamese(source, target, spec, cfg);
  CHECK(flat_params(a.params) == flat_params(b.params));
  CHECK(a.record.trace_csv() == b.record.trace_csv());
  cfg.seed += 1;
  const auto c = train_siamese(source, target, spec, cfg);
  CHECK(flat_params(a.params) != flat_params(c.params));
}

TEST_CASE("stage 2 resumes from the best stage-1 checkpoint") {
  auto [source, target] = small_sets(13);
  const auto spec = models::build_eegnet(source.E, source.T, source.C);
  TrainConfig cfg = quick_cfg();
  const auto out = train_siamese(source, target, spec, cfg);
  CHECK(out.record.best_epoch >= 1);
  CHECK(out.record.best_epoch <= out.record.stage1_epochs);
  CHECK(std::isfinite(out.record.best_val_loss));
  bool saw_stage2 = false;
  for (const auto& row : out.record.trace) {
    if (row.stage == 2) {
      saw_stage2 = true;
      CHECK(row.epoch > out.record.stage1_epochs);
    }
  }
  CHECK(saw_stage2);
  // Stage 2 stops when the training loss reaches the best validation loss.
  if (!out.record.diverged && out.record.stage2_epochs < cfg.max_epochs_stage2) {
    CHECK(out.record.stage2_final_train_loss <= out.record.best_val_loss);
  }
}

TEST_CASE("early stopping respects the patience window") {
  auto [source, target] = small_sets(14);
  const auto spec = models::build_eegnet(source.E, source.T, source.C);
  TrainConfig cfg = quick_cfg();
  cfg.max_epochs_stage1 = 100;
  cfg.max_epochs_stage2 = 0;
  cfg.patience = 3;
  const auto out = train_siamese(source, target, spec, cfg);
  CHECK(out.record.stage1_epochs <= 100);
  CHECK(out.record.stage1_epochs - out.record.best_epoch <= cfg.patience);
}

TEST_CASE("divergence aborts with the record intact") {
  auto [source, target] = small_sets(15);
  const auto spec = models::build_eegnet(source.E, source.T, source.C);
  TrainConfig cfg = quick_cfg();
  cfg.eta = 1e18;  // drives the squared activations over the double range
  const auto out = train_siamese(source, target, spec, cfg);
  CHECK(out.record.diverged);
  CHECK_FALSE(out.record.note.empty());
  CHECK(out.record.trace.size() <= 20);
}

TEST_CASE("a class missing from the source is an error") {
  auto [source, target] = small_sets(16);
  for (auto& l : source.labels) l = 0;  // collapse to one class
  const auto spec = models::build_eegnet(source.E, source.T, source.C);
  CHECK_THROWS_WITH_AS(train_siamese(source, target, spec, quick_cfg()),
                       doctest::Contains("class"), Error);
}

TEST_CASE("target labels do not influence training") {
  auto [source, target] = small_sets(17);
  const auto spec = models::build_eegnet(source.E, source.T, source.C);
  TrainConfig cfg = quick_cfg();
  cfg.max_epochs_stage1 = 5;
  cfg.max_epochs_stage2 = 2;
  const auto with_labels = train_siamese(source, target, spec, cfg);
  TrialSet unlabeled = target;
  unlabeled.labels.clear();
  const auto without_labels = train_siamese(source, unlabeled, spec, cfg);
  CHECK(flat_params(with_labels.params) == flat_params(without_labels.params));
}

TEST_CASE("the separable synthetic task trains to 95% within 200 epochs") {
  SynthConfig synth;
  synth.shift = 0.0;
  synth.samples = 256;
  synth.trials_per_domain = 96;
  synth.seed = 21;
  auto [source, target] = sdda::data::generate_synthetic(synth);

  TrainConfig cfg;
  cfg.arch = "eegnet";
  cfg.max_epochs_stage1 = 200;
  cfg.max_epochs_stage2 = 40;
  cfg.patience = 30;
  cfg.seed = 2;
  pipeline::PreprocOptions preproc;
  const auto result = pipeline::run_training(source, target, cfg, preproc);
  CHECK_FALSE(result.record.diverged);
  CHECK(result.record.stage1_epochs <= 200);
  // At zero shift the target session is an i.i.d. source-test split.
  const auto report = pipeline::evaluate_trained(result.model, target);
  CHECK(report.accuracy >= 0.95);
}

TEST_CASE("grid search ties break toward (0,0) and reuse the cell seeds") {
  auto [source, target] = small_sets(18, 32);
  TrainConfig cfg = quick_cfg();
  cfg.lambda1_grid = {0, 1};
  cfg.lambda2_grid = {0, 0.1};
  cfg.repetitions = 1;
  cfg.max_epochs_stage1 = 0;  // untrained: every cell evaluates identically
  cfg.max_epochs_stage2 = 0;
  pipeline::PreprocOptions preproc;
  preproc.filter = false;  // trials shorter than the default filter order
  const auto grid = pipeline::grid_search(source, target, cfg, preproc);
  CHECK(grid.best_lambda1 == 0.0);
  CHECK(grid.best_lambda2 == 0.0);
  for (const auto& row : grid.mean_accuracy) {
    for (double v : row) CHECK(v == grid.mean_accuracy[0][0]);
  }

  // The (0,0) cell is the vanilla-plus-preprocessing baseline under the
  // shared repetition seed.
  TrainConfig cell = cfg;
  cell.lambda1 = 0;
  cell.lambda2 = 0;
  cell.seed = derive_seed(cfg.seed, "grid/rep/0");
  const auto baseline = pipeline::run_training(source, target, cell, preproc);
  const auto report = pipeline::evaluate_trained(baseline.model, target);
  CHECK(report.accuracy == doctest::Approx(grid.mean_accuracy[0][0]));

  // Argmax accuracy is at least the (0,0) accuracy by construction.
  double best = -1;
  for (size_t i = 0; i < grid.lambda1_values.size(); ++i) {
    for (size_t j = 0; j < grid.lambda2_values.size(); ++j) {
      if (grid.lambda1_values[i] == grid.best_lambda1 &&
          grid.lambda2_values[j] == grid.best_lambda2) {
        best = grid.mean_accuracy[i][j];
      }
    }
  }
  CHECK(best >= grid.mean_accuracy[0][0]);
  const std::string csv = grid.to_csv();
  CHECK(csv.find("lambda1\\lambda2") != std::string::npos);
}

TEST_CASE("grid argmax excludes failed cells and breaks ties as documented") {
  const double nan = std::nan("");
  // All equal: smallest lambda2 then smallest lambda1 wins.
  CHECK(pipeline::grid_argmax({{0.5, 0.5}, {0.5, 0.5}}) == std::pair<size_t, size_t>{0, 0});
  // A NaN cell never wins even when everything else is worse.
  CHECK(pipeline::grid_argmax({{nan, 0.2}, {0.1, 0.1}}) == std::pair<size_t, size_t>{0, 1});
  // Tie between (0,1) and (1,0): smaller lambda2 (column) wins.
  CHECK(pipeline::grid_argmax({{0.1, 0.9}, {0.9, 0.1}}) == std::pair<size_t, size_t>{1, 0});
  CHECK_THROWS_AS(pipeline::grid_argmax({{nan, nan}}), Error);
}

TEST_CASE("checkpoints round trip through the binary format") {
  auto [source, target] = small_sets(19, 32);
  TrainConfig cfg = quick_cfg();
  cfg.max_epochs_stage1 = 3;
  cfg.max_epochs_stage2 = 1;
  pipeline::PreprocOptions preproc;
  preproc.filter = false;
  const auto result = pipeline::run_training(source, target, cfg, preproc);
  const std::string path = "/tmp/sdda_test_checkpoint.ckpt";
  pipeline::save_checkpoint(result.model, path);
  const auto loaded = pipeline::load_checkpoint(path);
  CHECK(loaded.spec.arch == result.model.spec.arch);
  CHECK(loaded.preproc.filter == result.model.preproc.filter);
  for (size_t i = 0; i < loaded.params.entries().size(); ++i) {
    CHECK(loaded.params.entries()[i].value.vec() ==
          result.model.params.entries()[i].value.vec());
  }
  const auto a = pipeline::evaluate_trained(result.model, target);
  const auto b = pipeline::evaluate_trained(loaded, target);
  CHECK(a.accuracy == b.accuracy);
  CHECK_THROWS_AS(pipeline::load_checkpoint("/tmp/definitely_missing.ckpt"), Error);
}

TEST_CASE("embedding export has the promised shape") {
  auto [source, target] = small_sets(20, 16);
  TrainConfig cfg = quick_cfg();
  cfg.max_epochs_stage1 = 1;
  cfg.max_epochs_stage2 = 0;
  pipeline::PreprocOptions preproc;
  preproc.filter = false;
  const auto result = pipeline::run_training(source, target, cfg, preproc);
  const std::string csv = pipeline::export_embeddings_csv(result.model, target, "target");
  size_t lines = 0;
  for (char c : csv) lines += c == '\n';
  CHECK(lines == static_cast<size_t>(target.n) + 1);  // header + one row per trial
  CHECK(csv.find("index,domain,label") == 0);
  CHECK(csv.find(",e" + std::to_string(result.model.spec.embedding_dim - 1)) !=
        std::string::npos);
  CHECK(csv.find("target") != std::string::npos);
}
