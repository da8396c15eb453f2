// Copyright 2026 The COMET Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "comet/config.hpp"
#include "comet/data.hpp"
#include "comet/model.hpp"
#include "comet/objective.hpp"
#include "comet/vq.hpp"

namespace comet {

/// Everything needed to score new data: configuration, parameters, the
/// frozen activation set, the memory bank, and (optionally) the
/// standardization fitted on the training data.
struct Checkpoint {
  static constexpr int kFormatVersion = 1;

  RunConfig config;
  ModelParams model;
  ActivationSet activations;
  MemoryBank bank;
  Standardizer stats;  // empty mean/stddev when the caller standardized externally
};

struct EpochLog {
  std::size_t epoch = 0;
  LossTerms train;       // mean over training batches
  LossTerms validation;  // zero when there is no validation split
  bool has_validation = false;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochLog> history;
};

/// One optimizer step on a batch: forward, analytic backward, AdamW.
LossTerms train_step(ModelParams& model, AdamW& optimizer, std::span<const Matrix> batch,
                     double alpha, double beta);

/// Phase 2: quantize every window at every scale and collect the
/// (scale, index) pairs that were hit.
ActivationSet collect_activations(const ModelParams& model, std::span<const Matrix> windows);

/// Two-phase training on an (already standardized) L x D series. The last
/// `validation_fraction` of windows is held out for loss reporting only.
/// When `log` is non-null, one line per epoch is written:
///   epoch=<n> rec=<..> cb=<..> cm=<..> total=<..> [val_total=<..>]
TrainResult train(const Matrix& series, const RunConfig& config, std::ostream* log = nullptr);

/// Binary checkpoint: a magic line, a one-line JSON header (format version,
/// config, shapes, activation set, payload size and checksum) and a
/// little-endian float64 payload. Round trips are bit-exact.
void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);
/// Throws FormatError for corrupt or truncated files and VersionError for an
/// unsupported format version.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace comet
