// Copyright 2026 The qpulse Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "qpulse/cli.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using qpulse::read_text_file;

namespace {

std::size_t count_lines(const std::string& text) {
  std::size_t n = 0;
  for (const char c : text)
    if (c == '\n') ++n;
  return n;
}

std::size_t count_columns(const std::string& header_line) {
  return static_cast<std::size_t>(std::count(header_line.begin(), header_line.end(), ',')) + 1;
}

std::string first_line(const std::string& text) { return text.substr(0, text.find('\n')); }

class CliTest : public ::testing::Test {
 protected:
  // One shared task/grid generation for the whole suite; each test gets its
  // own output directory underneath.
  static void SetUpTestSuite() {
    base_ = fs::temp_directory_path() / "qpulse_cli_suite";
    fs::remove_all(base_);
    qpulse::config::ExperimentConfig cfg;
    cfg.out_dir = (base_ / "data").string();
    std::ostringstream quiet;
    ASSERT_EQ(qpulse::cli::cmd_gen_tasks(cfg, false, quiet), 0);
  }

  void SetUp() override {
    dir_ = base_ / ::testing::UnitTest::GetInstance()->current_test_info()->name();
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }

  // Small-but-real experiment: tiny network, few epochs, coarse integrator.
  // Everything still flows through the production code paths.
  qpulse::config::ExperimentConfig tiny_config(const std::string& algorithm, int case_id,
                                               const std::string& run_name) const {
    qpulse::config::ExperimentConfig cfg;
    cfg.case_id = case_id;
    cfg.algorithm = algorithm;
    cfg.tasks_file = (base_ / "data" / "tasks.json").string();
    cfg.grid_file = (base_ / "data" / "grid.json").string();
    cfg.out_dir = (dir_ / run_name).string();
    cfg.substeps = 8;
    cfg.deterministic_timing = true;
    cfg.overrides = {{"hidden_sizes", {8, 8}}};
    if (algorithm == "drl") {
      cfg.overrides["epochs"] = 6;
      cfg.overrides["validation_every"] = 3;
    } else {
      cfg.overrides["epochs"] = 8;
      cfg.sl_task_stride = 100;
    }
    return cfg;
  }

  static fs::path base_;
  fs::path dir_;
};

fs::path CliTest::base_;

TEST_F(CliTest, GenTasksWritesTaskAndGridFiles) {
  const auto tasks_json = nlohmann::json::parse(read_text_file(base_ / "data" / "tasks.json"));
  const auto tasks = qpulse::tasks::tasks_file_from_json(tasks_json);
  EXPECT_EQ(tasks.tasks.size(), 992u);
  EXPECT_EQ(tasks.split.train.size(), 700u);
  EXPECT_EQ(tasks.split.validation.size(), 50u);
  EXPECT_EQ(tasks.split.test.size(), 242u);
  EXPECT_EQ(tasks.split.shuffle_seed, 42u);

  const auto grid_json = nlohmann::json::parse(read_text_file(base_ / "data" / "grid.json"));
  const auto grid = qpulse::tasks::grid_from_json(grid_json);
  EXPECT_EQ(grid.training.size(), 45u);
  EXPECT_EQ(grid.held_out.size(), 4u);
}

TEST_F(CliTest, GenTasksRespectsForceAndIsReproducible) {
  qpulse::config::ExperimentConfig cfg;
  cfg.out_dir = dir_.string();
  std::ostringstream quiet;
  ASSERT_EQ(qpulse::cli::cmd_gen_tasks(cfg, false, quiet), 0);
  EXPECT_THROW(qpulse::cli::cmd_gen_tasks(cfg, false, quiet), std::runtime_error);
  ASSERT_EQ(qpulse::cli::cmd_gen_tasks(cfg, true, quiet), 0);
  // Regeneration is byte-identical to the suite-wide copy.
  EXPECT_EQ(read_text_file(dir_ / "tasks.json"), read_text_file(base_ / "data" / "tasks.json"));
  EXPECT_EQ(read_text_file(dir_ / "grid.json"), read_text_file(base_ / "data" / "grid.json"));
}

TEST_F(CliTest, TrainDrlWritesCheckpointAndCurve) {
  const auto cfg = tiny_config("drl", 1, "run");
  std::ostringstream quiet;
  ASSERT_EQ(qpulse::cli::cmd_train(cfg, false, quiet), 0);

  const auto ckpt = qpulse::nn::load_checkpoint(fs::path(cfg.out_dir) / "checkpoint.json");
  EXPECT_EQ(ckpt.case_id, 1);
  EXPECT_EQ(ckpt.mlp.head, qpulse::nn::Head::kQ);
  EXPECT_EQ(ckpt.mlp.layer_sizes, (std::vector<int>{8, 8, 8, 27}));
  EXPECT_EQ(ckpt.metadata.at("algorithm"), "drl");
  EXPECT_EQ(ckpt.metadata.at("config_hash"), qpulse::config::config_hash(cfg));
  // Case 1 trains without system-bath coupling regardless of the eval bath.
  EXPECT_DOUBLE_EQ(ckpt.metadata.at("bath").at("Gamma").get<double>(), 0.0);

  const std::string curve = read_text_file(fs::path(cfg.out_dir) / "curve.csv");
  EXPECT_EQ(first_line(curve), "epoch,mean_validation_fidelity,mean_cumulative_reward,epsilon,"
                               "loss_moving_avg");
  EXPECT_EQ(count_lines(curve), 1u + 2u);  // header + epochs 3 and 6

  EXPECT_THROW(qpulse::cli::cmd_train(cfg, false, quiet), std::runtime_error);
  EXPECT_EQ(qpulse::cli::cmd_train(cfg, true, quiet), 0);
}

TEST_F(CliTest, TrainDrlIsDeterministic) {
  auto a = tiny_config("drl", 1, "a");
  auto b = tiny_config("drl", 1, "b");
  std::ostringstream quiet;
  ASSERT_EQ(qpulse::cli::cmd_train(a, false, quiet), 0);
  ASSERT_EQ(qpulse::cli::cmd_train(b, false, quiet), 0);
  EXPECT_EQ(read_text_file(fs::path(a.out_dir) / "checkpoint.json"),
            read_text_file(fs::path(b.out_dir) / "checkpoint.json"));
  EXPECT_EQ(read_text_file(fs::path(a.out_dir) / "curve.csv"),
            read_text_file(fs::path(b.out_dir) / "curve.csv"));
}

TEST_F(CliTest, TrainSlWritesDatasetCheckpointAndCurve) {
  const auto cfg = tiny_config("sl", 2, "run");
  std::ostringstream quiet;
  ASSERT_EQ(qpulse::cli::cmd_train(cfg, false, quiet), 0);

  const std::string dataset = read_text_file(fs::path(cfg.out_dir) / "dataset.csv");
  EXPECT_EQ(first_line(dataset),
            "f0,f1,f2,f3,f4,f5,f6,f7,label,fidelity_before,fidelity_after,task_id,Gamma,gamma,T");
  EXPECT_GE(count_lines(dataset), 2u);

  const auto ckpt = qpulse::nn::load_checkpoint(fs::path(cfg.out_dir) / "checkpoint.json");
  EXPECT_EQ(ckpt.case_id, 2);
  EXPECT_EQ(ckpt.mlp.head, qpulse::nn::Head::kLogSoftmax);
  EXPECT_EQ(ckpt.metadata.at("sl_task_stride"), 100);
  EXPECT_DOUBLE_EQ(ckpt.metadata.at("bath").at("Gamma").get<double>(), 0.1);

  const std::string curve = read_text_file(fs::path(cfg.out_dir) / "curve.csv");
  EXPECT_EQ(first_line(curve), "epoch,train_loss,validation_loss,validation_accuracy");
  EXPECT_EQ(count_lines(curve), 1u + 8u);
}

TEST_F(CliTest, TrainCase3StampsGridHash) {
  auto cfg = tiny_config("drl", 3, "run");
  cfg.overrides["epochs"] = 4;
  cfg.overrides["validation_every"] = 2;
  std::ostringstream quiet;
  ASSERT_EQ(qpulse::cli::cmd_train(cfg, false, quiet), 0);
  const auto ckpt = qpulse::nn::load_checkpoint(fs::path(cfg.out_dir) / "checkpoint.json");
  const auto grid = qpulse::cli::detail::load_grid(cfg);
  EXPECT_EQ(ckpt.metadata.at("bath_grid_hash"),
            qpulse::hex64(qpulse::tasks::grid_hash(grid)));
  EXPECT_FALSE(ckpt.metadata.contains("bath"));

  cfg.grid_file.clear();
  EXPECT_THROW(qpulse::cli::cmd_train(cfg, true, quiet), std::invalid_argument);
}

TEST_F(CliTest, EvalWritesResultsAndSummary) {
  const auto cfg = tiny_config("drl", 1, "run");
  std::ostringstream quiet;
  ASSERT_EQ(qpulse::cli::cmd_train(cfg, false, quiet), 0);
  const std::string ckpt_path = (fs::path(cfg.out_dir) / "checkpoint.json").string();
  ASSERT_EQ(qpulse::cli::cmd_eval(cfg, ckpt_path, "validation", "val", false, quiet), 0);

  const std::string results = read_text_file(fs::path(cfg.out_dir) / "results_val.csv");
  EXPECT_EQ(first_line(results),
            "task_id,case,algorithm,Gamma,gamma,T,steps,best_fidelity,final_fidelity,"
            "design_time_s,succeeded");
  EXPECT_EQ(count_lines(results), 1u + 50u);

  const auto summary =
      nlohmann::json::parse(read_text_file(fs::path(cfg.out_dir) / "summary_val.json"));
  EXPECT_EQ(summary.at("split"), "validation");
  EXPECT_EQ(summary.at("checkpoint"), ckpt_path);
  EXPECT_EQ(summary.at("num_tasks"), 50);
  EXPECT_EQ(summary.at("case"), 1);
  EXPECT_EQ(summary.at("algorithm"), "drl");
  EXPECT_EQ(summary.at("config_hash"), qpulse::config::config_hash(cfg));
  EXPECT_TRUE(summary.contains("mean_best_fidelity"));
  EXPECT_TRUE(summary.contains("positivity_breaches"));
  // Deterministic timing zeroes the wall-clock column for replayable output.
  EXPECT_DOUBLE_EQ(summary.at("mean_design_time_s").get<double>(), 0.0);

  EXPECT_THROW(qpulse::cli::cmd_eval(cfg, ckpt_path, "validation", "val", false, quiet),
               std::runtime_error);
  EXPECT_THROW(qpulse::cli::cmd_eval(cfg, ckpt_path, "nope", "x", false, quiet),
               std::invalid_argument);
}

TEST_F(CliTest, EvalRejectsCaseMismatch) {
  const auto cfg = tiny_config("drl", 1, "run");
  std::ostringstream quiet;
  ASSERT_EQ(qpulse::cli::cmd_train(cfg, false, quiet), 0);
  auto wrong = cfg;
  wrong.case_id = 2;
  EXPECT_THROW(qpulse::cli::cmd_eval(wrong, (fs::path(cfg.out_dir) / "checkpoint.json").string(),
                                     "test", "", false, quiet),
               std::invalid_argument);
}

TEST_F(CliTest, EvalIsWorkerCountInvariant) {
  auto cfg = tiny_config("drl", 1, "run");
  std::ostringstream quiet;
  ASSERT_EQ(qpulse::cli::cmd_train(cfg, false, quiet), 0);
  const std::string ckpt_path = (fs::path(cfg.out_dir) / "checkpoint.json").string();
  cfg.workers = 1;
  ASSERT_EQ(qpulse::cli::cmd_eval(cfg, ckpt_path, "validation", "w1", false, quiet), 0);
  cfg.workers = 4;
  ASSERT_EQ(qpulse::cli::cmd_eval(cfg, ckpt_path, "validation", "w4", false, quiet), 0);
  EXPECT_EQ(read_text_file(fs::path(cfg.out_dir) / "results_w1.csv"),
            read_text_file(fs::path(cfg.out_dir) / "results_w4.csv"));
}

TEST(SweepPoints, CoversAxisValuesAndOnAxisProbes) {
  const auto axes = qpulse::tasks::default_axes();
  const auto held_out = qpulse::tasks::default_held_out();

  const auto gamma_big = qpulse::cli::sweep_points("Gamma", axes, held_out);
  ASSERT_EQ(gamma_big.size(), 7u);  // 5 grid values + held-out 0.05 and 0.3
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_DOUBLE_EQ(gamma_big[i].bath.coupling, axes.coupling[i]);
    EXPECT_DOUBLE_EQ(gamma_big[i].bath.memory_rate, 4.0);
    EXPECT_DOUBLE_EQ(gamma_big[i].bath.temperature, 10.0);
    EXPECT_TRUE(gamma_big[i].seen_in_training);
  }
  EXPECT_DOUBLE_EQ(gamma_big[5].bath.coupling, 0.05);
  EXPECT_FALSE(gamma_big[5].seen_in_training);
  EXPECT_DOUBLE_EQ(gamma_big[6].bath.coupling, 0.3);
  EXPECT_FALSE(gamma_big[6].seen_in_training);

  const auto memory = qpulse::cli::sweep_points("gamma", axes, held_out);
  ASSERT_EQ(memory.size(), 4u);  // {2,4,8} + held-out 6
  EXPECT_DOUBLE_EQ(memory[3].bath.memory_rate, 6.0);
  EXPECT_FALSE(memory[3].seen_in_training);

  const auto temp = qpulse::cli::sweep_points("T", axes, held_out);
  ASSERT_EQ(temp.size(), 4u);  // {5,10,20} + held-out 15
  EXPECT_DOUBLE_EQ(temp[3].bath.temperature, 15.0);
  for (const auto& p : temp) {
    EXPECT_DOUBLE_EQ(p.bath.coupling, 0.1);
    EXPECT_DOUBLE_EQ(p.bath.memory_rate, 4.0);
  }

  EXPECT_THROW(qpulse::cli::sweep_points("beta", axes, held_out), std::invalid_argument);
}

TEST_F(CliTest, SweepWritesOneRowPerCheckpointAndPoint) {
  const auto cfg = tiny_config("drl", 1, "run");
  std::ostringstream quiet;
  ASSERT_EQ(qpulse::cli::cmd_train(cfg, false, quiet), 0);
  const std::string ckpt_path = (fs::path(cfg.out_dir) / "checkpoint.json").string();
  ASSERT_EQ(qpulse::cli::cmd_sweep(cfg, {ckpt_path, ckpt_path}, "T", false, quiet), 0);

  const std::string csv = read_text_file(fs::path(cfg.out_dir) / "sweep_T.csv");
  EXPECT_EQ(count_columns(first_line(csv)), 17u);
  EXPECT_EQ(count_lines(csv), 1u + 2u * 4u);
  // The held-out probe rows carry the flag the plotting side keys on.
  EXPECT_NE(csv.find(",15,"), std::string::npos);
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);  // header
  int flagged = 0;
  while (std::getline(lines, line)) {
    ASSERT_FALSE(line.empty());
    if (line.back() == '0') ++flagged;
  }
  EXPECT_EQ(flagged, 2);

  EXPECT_THROW(qpulse::cli::cmd_sweep(cfg, {}, "T", true, quiet), std::invalid_argument);
}

TEST_F(CliTest, ReportMergesCsvInputs) {
  const std::string header = "a,b\n";
  qpulse::write_text_file(dir_ / "one.csv", header + "1,2\n");
  qpulse::write_text_file(dir_ / "two.csv", header + "3,4\n5,6\n");
  std::ostringstream quiet;
  const std::string out = (dir_ / "merged.csv").string();
  ASSERT_EQ(qpulse::cli::cmd_report({(dir_ / "one.csv").string(), (dir_ / "two.csv").string()},
                                    out, false, quiet),
            0);
  EXPECT_EQ(read_text_file(out), header + "1,2\n3,4\n5,6\n");

  // Header disagreement is a hard error, not silent column soup.
  qpulse::write_text_file(dir_ / "odd.csv", "a,c\n7,8\n");
  EXPECT_THROW(qpulse::cli::cmd_report({(dir_ / "one.csv").string(), (dir_ / "odd.csv").string()},
                                       (dir_ / "bad.csv").string(), false, quiet),
               std::runtime_error);
  EXPECT_THROW(qpulse::cli::cmd_report({(dir_ / "one.csv").string()}, out, false, quiet),
               std::runtime_error);  // exists, no force
  ASSERT_EQ(qpulse::cli::cmd_report({(dir_ / "one.csv").string()}, out, true, quiet), 0);
}

TEST_F(CliTest, ReportMergesJsonInputsAndFlattensArrays) {
  qpulse::write_text_file(dir_ / "one.json", "{\"x\": 1}\n");
  qpulse::write_text_file(dir_ / "two.json", "[{\"x\": 2}, {\"x\": 3}]\n");
  std::ostringstream quiet;
  const std::string out = (dir_ / "merged.json").string();
  ASSERT_EQ(qpulse::cli::cmd_report({(dir_ / "one.json").string(), (dir_ / "two.json").string()},
                                    out, false, quiet),
            0);
  const auto merged = nlohmann::json::parse(read_text_file(out));
  ASSERT_TRUE(merged.is_array());
  ASSERT_EQ(merged.size(), 3u);
  EXPECT_EQ(merged[0].at("x"), 1);
  EXPECT_EQ(merged[2].at("x"), 3);

  EXPECT_THROW(qpulse::cli::cmd_report({(dir_ / "one.json").string(), (dir_ / "one.csv").string()},
                                       (dir_ / "mixed.out").string(), false, quiet),
               std::invalid_argument);
}

}  // namespace
