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

#include "comet/train.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <ostream>
#include <sstream>

#include "comet/error.hpp"

namespace comet {

namespace {

constexpr const char* kMagic = "COMET-CHECKPOINT";

std::vector<Matrix> gather(const Matrix& series, std::span<const std::size_t> offsets,
                           std::size_t window) {
  std::vector<Matrix> out;
  out.reserve(offsets.size());
  for (std::size_t off : offsets) out.push_back(slice_window(series, off, window));
  return out;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

LossTerms train_step(ModelParams& model, AdamW& optimizer, std::span<const Matrix> batch,
                     double alpha, double beta) {
  ModelParams grads = model.zeros_like();
  const LossTerms terms = batch_objective(model, batch, alpha, beta, grads);
  auto params = model.tensors();
  auto g = static_cast<const ModelParams&>(grads).tensors();
  optimizer.step(params, g);
  return terms;
}

ActivationSet collect_activations(const ModelParams& model, std::span<const Matrix> windows) {
  ActivationSet set(model.scale_count());
  for (const Matrix& w : windows) {
    for (std::size_t k = 0; k < model.scale_count(); ++k) {
      const ForwardCache cache = encode(extract_patches(w, model.scales[k]), model.layers[k]);
      for (std::size_t r = 0; r < cache.embeddings.rows(); ++r) {
        set.record(k, quantize(cache.embeddings.row(r), model.codebooks[k]).index);
      }
    }
  }
  return set;
}

TrainResult train(const Matrix& series, const RunConfig& config, std::ostream* log) {
  config.validate();
  const auto offsets = window_offsets(series.rows(), config.window_length, config.window_stride);
  const std::size_t n_windows = offsets.size();
  std::size_t n_val = static_cast<std::size_t>(
      std::floor(config.train.validation_fraction * static_cast<double>(n_windows)));
  if (n_val >= n_windows) n_val = n_windows - 1;
  const std::size_t n_train = n_windows - n_val;

  const std::vector<Matrix> windows = gather(series, offsets, config.window_length);
  std::span<const Matrix> train_windows(windows.data(), n_train);
  std::span<const Matrix> val_windows(windows.data() + n_train, n_val);

  ModelDims dims{series.cols(), config.embed, config.core, config.codebook};
  Rng rng(config.seed);
  TrainResult result;
  Checkpoint& ckpt = result.checkpoint;
  ckpt.config = config;
  ckpt.model = ModelParams::init(dims, config.scales, rng);

  AdamW optimizer({.learning_rate = config.train.learning_rate,
                   .weight_decay = config.train.weight_decay});
  const double alpha = config.train.alpha;
  const double beta = config.train.beta;

  std::vector<std::size_t> order(n_train);
  for (std::size_t i = 0; i < n_train; ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= config.train.epochs; ++epoch) {
    rng.shuffle(order);
    EpochLog entry;
    entry.epoch = epoch;
    for (std::size_t b = 0; b < n_train; b += config.train.batch_size) {
      const std::size_t end = std::min(n_train, b + config.train.batch_size);
      std::vector<Matrix> batch;
      batch.reserve(end - b);
      for (std::size_t i = b; i < end; ++i) batch.push_back(train_windows[order[i]]);
      LossTerms t = train_step(ckpt.model, optimizer, batch, alpha, beta);
      const double w = static_cast<double>(end - b) / static_cast<double>(n_train);
      entry.train += LossTerms{w * t.reconstruction, w * t.codebook, w * t.commitment};
    }
    for (const Matrix* m : static_cast<const ModelParams&>(ckpt.model).tensors()) {
      if (!m->all_finite()) {
        throw NumericError("training diverged: non-finite parameters after epoch " +
                           std::to_string(epoch));
      }
    }
    if (n_val > 0) {
      entry.has_validation = true;
      for (const Matrix& w : val_windows) {
        WindowPass pass = forward_window(ckpt.model, w);
        std::vector<std::vector<double>> weights(pass.caches.size());
        for (std::size_t k = 0; k < weights.size(); ++k) {
          weights[k].assign(pass.rows(k), 1.0 / (static_cast<double>(n_val) *
                                                 static_cast<double>(pass.rows(k))));
        }
        entry.validation += evaluate_objective(pass, weights);
      }
    }
    if (log != nullptr) {
      *log << "epoch=" << epoch << " rec=" << fmt(entry.train.reconstruction)
           << " cb=" << fmt(entry.train.codebook) << " cm=" << fmt(entry.train.commitment)
           << " total=" << fmt(entry.train.total(alpha, beta));
      if (entry.has_validation) *log << " val_total=" << fmt(entry.validation.total(alpha, beta));
      *log << '\n';
    }
    result.history.push_back(entry);
  }

  ckpt.activations = collect_activations(ckpt.model, train_windows);
  ckpt.bank = build_memory_bank(ckpt.model.codebooks, ckpt.activations,
                                config.scoring.density_neighbors);
  return result;
}

// ---------------------------------------------------------------------------
// Checkpoint persistence

namespace {

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void put_double(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xffU));
}

class PayloadReader {
 public:
  explicit PayloadReader(const std::string& bytes) : bytes_(bytes) {}
  double next() {
    if (pos_ + 8 > bytes_.size()) throw FormatError("checkpoint payload is truncated");
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + b])) << (8 * b);
    }
    pos_ += 8;
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
  }
  void fill(Matrix& m) {
    for (double& v : m.data()) v = next();
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::string payload;
  for (const Matrix* m : ckpt.model.tensors())
    for (double v : m->data()) put_double(payload, v);
  for (const auto& sb : ckpt.bank.scales)
    for (double s : sb.sigma) put_double(payload, s);
  for (double v : ckpt.stats.mean) put_double(payload, v);
  for (double v : ckpt.stats.stddev) put_double(payload, v);

  nlohmann::json activations = nlohmann::json::array();
  for (std::size_t k = 0; k < ckpt.activations.scales(); ++k) {
    const auto& s = ckpt.activations.at(k);
    activations.push_back(std::vector<std::size_t>(s.begin(), s.end()));
  }
  nlohmann::json bank = nlohmann::json::array();
  for (const auto& sb : ckpt.bank.scales) bank.push_back(sb.indices);

  nlohmann::json header = {
      {"format_version", Checkpoint::kFormatVersion},
      {"config", to_json(ckpt.config)},
      {"dims",
       {{"variables", ckpt.model.dims.variables},
        {"embed", ckpt.model.dims.embed},
        {"core", ckpt.model.dims.core},
        {"codebook", ckpt.model.dims.codebook}}},
      {"activations", activations},
      {"bank", {{"density_neighbors", ckpt.bank.density_neighbors}, {"indices", bank}}},
      {"standardizer", {{"variables", ckpt.stats.mean.size()}, {"eps", ckpt.stats.eps}}},
      {"payload_bytes", payload.size()},
      {"checksum", hex64(fnv1a(payload))},
  };

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint '" + path + "'");
  out << kMagic << '\n' << header.dump() << '\n';
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw DataError("failed writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path + "'");
  std::string magic, header_line;
  if (!std::getline(in, magic) || magic != kMagic) {
    throw FormatError("'" + path + "' is not a checkpoint (bad magic line)");
  }
  if (!std::getline(in, header_line)) throw FormatError("checkpoint header is missing");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_line);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint header is corrupt: ") + e.what());
  }
  std::string payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  Checkpoint ckpt;
  try {
    const int version = header.at("format_version").get<int>();
    if (version != Checkpoint::kFormatVersion) {
      throw VersionError("checkpoint format version " + std::to_string(version) +
                         " is not supported (expected " +
                         std::to_string(Checkpoint::kFormatVersion) + ")");
    }
    if (payload.size() != header.at("payload_bytes").get<std::size_t>()) {
      throw FormatError("checkpoint payload is truncated or has trailing bytes");
    }
    if (hex64(fnv1a(payload)) != header.at("checksum").get<std::string>()) {
      throw FormatError("checkpoint payload checksum mismatch");
    }
    ckpt.config = config_from_json(header.at("config"));
    ckpt.config.validate();
    const auto& d = header.at("dims");
    ModelDims dims{d.at("variables").get<std::size_t>(), d.at("embed").get<std::size_t>(),
                   d.at("core").get<std::size_t>(), d.at("codebook").get<std::size_t>()};
    dims.validate();
    ckpt.model.dims = dims;
    ckpt.model.scales = ckpt.config.scales;
    for (std::size_t k = 0; k < ckpt.model.scales.size(); ++k) {
      ckpt.model.layers.push_back(ScaleParams::zeros(dims, ckpt.model.scales[k].patch));
      ckpt.model.codebooks.push_back({k, Matrix(dims.codebook, dims.embed)});
    }
    PayloadReader reader(payload);
    for (Matrix* m : ckpt.model.tensors()) reader.fill(*m);

    const auto& acts = header.at("activations");
    ckpt.activations = ActivationSet(acts.size());
    for (std::size_t k = 0; k < acts.size(); ++k)
      for (std::size_t idx : acts[k].get<std::vector<std::size_t>>()) ckpt.activations.record(k, idx);

    const auto& bank = header.at("bank");
    ckpt.bank.density_neighbors = bank.at("density_neighbors").get<std::size_t>();
    const auto& indices = bank.at("indices");
    if (indices.size() != ckpt.model.scale_count()) {
      throw FormatError("checkpoint bank scale count does not match the model");
    }
    for (std::size_t k = 0; k < indices.size(); ++k) {
      ScaleBank sb;
      sb.indices = indices[k].get<std::vector<std::size_t>>();
      sb.vectors = Matrix(sb.indices.size(), dims.embed);
      for (std::size_t r = 0; r < sb.indices.size(); ++r) {
        if (sb.indices[r] >= dims.codebook) throw FormatError("bank index out of range");
        auto src = ckpt.model.codebooks[k].entries.row(sb.indices[r]);
        std::copy(src.begin(), src.end(), sb.vectors.row(r).begin());
      }
      sb.sigma.resize(sb.indices.size());
      ckpt.bank.scales.push_back(std::move(sb));
    }
    for (auto& sb : ckpt.bank.scales)
      for (double& s : sb.sigma) s = reader.next();

    const auto& st = header.at("standardizer");
    const std::size_t nstats = st.at("variables").get<std::size_t>();
    ckpt.stats.eps = st.at("eps").get<double>();
    ckpt.stats.mean.resize(nstats);
    ckpt.stats.stddev.resize(nstats);
    for (double& v : ckpt.stats.mean) v = reader.next();
    for (double& v : ckpt.stats.stddev) v = reader.next();
    if (!reader.done()) throw FormatError("checkpoint payload has unexpected trailing bytes");
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint header is malformed: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint config is invalid: ") + e.what());
  }
  return ckpt;
}

}  // namespace comet
