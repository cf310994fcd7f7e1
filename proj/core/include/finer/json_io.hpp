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

// nlohmann::json bindings for the configuration and record types.

#include "json.hpp"

#include "finer/net.hpp"
#include "finer/task.hpp"

namespace finer {

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(Range, min, max)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TaskSpec, vocab_size, motif_vocab, benign_motifs,
                                                malicious_motifs, motif_length, ics_per_sample,
                                                ic_length, planted, motif_rate, bias_motifs,
                                                bias_rate_risk, bias_rate_benign, train_benign,
                                                train_risk, test_benign, test_risk, max_len,
                                                embed_dim, seed, embedding_seed)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(IC, name, tokens)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ProblemSample, id, label, ics, ground_truth)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrainConfig, learning_rate, batch_size,
                                                max_epochs, seed, momentum)

}  // namespace finer
