/*
 * Copyright 2026 The FINER Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "finer/tools/config.hpp"

namespace finer::tools {

inline constexpr std::string_view kBaselineModel = "baseline";
inline constexpr std::string_view kFinetunedModel = "finetuned";

// Experiment stages over one output directory. Each stage reads the artifacts
// of the previous ones from disk, so stages can run as separate processes.
class Pipeline {
 public:
  explicit Pipeline(ExperimentConfig cfg);

  const ExperimentConfig& config() const { return cfg_; }
  const std::filesystem::path& out() const { return out_; }
  const std::string& hash() const { return hash_; }

  void gen_data();
  void train();
  void finetune();
  void explain();
  void eval();
  void ablate();
  void report();
  // All stages in order.
  void run_all();

 private:
  ExperimentConfig cfg_;
  Seeds seeds_;
  std::filesystem::path out_;
  std::string hash_;
};

}  // namespace finer::tools
