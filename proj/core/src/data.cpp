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

#include "comet/data.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <sstream>

#include "comet/error.hpp"

namespace comet {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  errno = 0;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size() && errno != ERANGE && std::isfinite(out);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const char* anomaly_name(AnomalyType t) {
  switch (t) {
    case AnomalyType::kPoint: return "point";
    case AnomalyType::kContextual: return "contextual";
    case AnomalyType::kCollective: return "collective";
  }
  return "point";
}

}  // namespace

// ---------------------------------------------------------------------------
// Standardization

Standardizer Standardizer::fit(const Matrix& train, double eps) {
  if (train.rows() == 0) throw DataError("cannot standardize an empty series");
  Standardizer s;
  s.eps = eps;
  const std::size_t L = train.rows();
  s.mean.assign(train.cols(), 0.0);
  s.stddev.assign(train.cols(), 0.0);
  for (std::size_t c = 0; c < train.cols(); ++c) {
    double m = 0.0;
    for (std::size_t r = 0; r < L; ++r) m += train(r, c);
    m /= static_cast<double>(L);
    double v = 0.0;
    for (std::size_t r = 0; r < L; ++r) v += (train(r, c) - m) * (train(r, c) - m);
    s.mean[c] = m;
    s.stddev[c] = std::sqrt(v / static_cast<double>(L));
  }
  return s;
}

Matrix Standardizer::apply(const Matrix& values) const {
  if (values.cols() != mean.size()) {
    throw DataError("series has " + std::to_string(values.cols()) +
                    " variables, standardization stats have " + std::to_string(mean.size()));
  }
  Matrix out(values.rows(), values.cols());
  for (std::size_t r = 0; r < values.rows(); ++r)
    for (std::size_t c = 0; c < values.cols(); ++c)
      out(r, c) = (values(r, c) - mean[c]) / (stddev[c] + eps);
  return out;
}

Dataset standardize(Dataset dataset, double eps) {
  dataset.stats = Standardizer::fit(dataset.train.values, eps);
  dataset.train.values = dataset.stats.apply(dataset.train.values);
  if (dataset.test.values.rows() > 0) dataset.test.values = dataset.stats.apply(dataset.test.values);
  return dataset;
}

// ---------------------------------------------------------------------------
// CSV

TimeSeries load_csv(const std::string& path, const std::optional<std::string>& label_column) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open data file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError("data file '" + path + "' is empty");
  const auto header = split_csv(line);
  std::ptrdiff_t label_idx = -1;
  TimeSeries ts;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (label_column && header[c] == *label_column) {
      label_idx = static_cast<std::ptrdiff_t>(c);
    } else {
      ts.names.push_back(header[c]);
    }
  }
  if (ts.names.empty()) throw DataError("data file '" + path + "' has no value columns");

  std::vector<double> values;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto cells = split_csv(line);
    if (cells.size() != header.size()) {
      throw DataError(path + ": row " + std::to_string(row) + " has " +
                      std::to_string(cells.size()) + " cells, header has " +
                      std::to_string(header.size()));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      double v = 0.0;
      if (!parse_double(cells[c], v)) {
        throw DataError(path + ": row " + std::to_string(row) + ", column '" + header[c] +
                        "': non-numeric cell '" + cells[c] + "'");
      }
      if (static_cast<std::ptrdiff_t>(c) == label_idx) {
        ts.labels.push_back(v != 0.0 ? 1 : 0);
      } else {
        values.push_back(v);
      }
    }
  }
  if (row == 0) throw DataError("data file '" + path + "' has no data rows");
  ts.values = Matrix(row, ts.names.size(), std::move(values));
  return ts;
}

void save_csv(const std::string& path, const TimeSeries& series) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  for (std::size_t c = 0; c < series.variables(); ++c) {
    if (c) out << ',';
    out << (c < series.names.size() ? series.names[c] : "x" + std::to_string(c));
  }
  if (series.labeled()) out << ",label";
  out << '\n';
  for (std::size_t r = 0; r < series.length(); ++r) {
    for (std::size_t c = 0; c < series.variables(); ++c) {
      if (c) out << ',';
      out << format_double(series.values(r, c));
    }
    if (series.labeled()) out << ',' << series.labels[r];
    out << '\n';
  }
  if (!out) throw DataError("failed writing '" + path + "'");
}

// ---------------------------------------------------------------------------
// Windows

std::vector<std::size_t> window_offsets(std::size_t length, std::size_t window,
                                        std::size_t stride) {
  if (window == 0 || stride == 0) throw ConfigError("window length and stride must be >= 1");
  if (length < window) {
    throw DataError("series of length " + std::to_string(length) +
                    " is shorter than one window (" + std::to_string(window) + ")");
  }
  std::vector<std::size_t> offsets;
  for (std::size_t off = 0; off + window <= length; off += stride) offsets.push_back(off);
  if (offsets.back() + window < length) offsets.push_back(length - window);
  return offsets;
}

Matrix slice_window(const Matrix& series, std::size_t offset, std::size_t window) {
  if (offset + window > series.rows()) throw DataError("window exceeds series bounds");
  Matrix out(window, series.cols());
  for (std::size_t r = 0; r < window; ++r) {
    auto src = series.row(offset + r);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic corpora

void SyntheticSpec::validate() const {
  if (variables < 1) throw ConfigError("variables: must be >= 1");
  if (train_length < 1) throw ConfigError("train_length: must be >= 1");
  if (test_length < 1) throw ConfigError("test_length: must be >= 1");
  if (components < 1) throw ConfigError("components: must be >= 1");
  if (noise < 0.0) throw ConfigError("noise: must be >= 0");
  for (std::size_t a = 0; a < anomalies.size(); ++a) {
    const auto& an = anomalies[a];
    const std::string f = "anomalies[" + std::to_string(a) + "]";
    if (an.duration < 1) throw ConfigError(f + ".duration: must be >= 1");
    if (an.type == AnomalyType::kPoint && an.duration != 1) {
      throw ConfigError(f + ".duration: point anomalies last exactly one step");
    }
    if (an.start + an.duration > test_length) {
      throw ConfigError(f + ": interval exceeds test_length");
    }
    if (an.variable < -1 || an.variable >= static_cast<int>(variables)) {
      throw ConfigError(f + ".variable: out of range");
    }
    for (std::size_t b = 0; b < a; ++b) {
      const auto& o = anomalies[b];
      if (an.start < o.start + o.duration && o.start < an.start + an.duration) {
        throw ConfigError(f + ": overlaps anomalies[" + std::to_string(b) + "]");
      }
    }
  }
}

nlohmann::json to_json(const SyntheticSpec& spec) {
  nlohmann::json anomalies = nlohmann::json::array();
  for (const auto& a : spec.anomalies) {
    anomalies.push_back({{"type", anomaly_name(a.type)},
                         {"start", a.start},
                         {"duration", a.duration},
                         {"magnitude", a.magnitude},
                         {"variable", a.variable}});
  }
  return {{"variables", spec.variables}, {"train_length", spec.train_length},
          {"test_length", spec.test_length}, {"components", spec.components},
          {"noise", spec.noise}, {"drift", spec.drift},
          {"seed", spec.seed}, {"anomalies", anomalies}};
}

SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j) {
  SyntheticSpec s;
  s.anomalies.clear();
  auto get = [&](const nlohmann::json& obj, const char* key, auto& out, const std::string& where) {
    if (!obj.contains(key)) return;
    try {
      out = obj.at(key).get<std::decay_t<decltype(out)>>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(where + key + ": " + e.what());
    }
  };
  if (!j.is_object()) throw ConfigError("synthetic spec: expected a JSON object");
  for (const auto& [key, _] : j.items()) {
    static const std::vector<std::string> known = {"variables", "train_length", "test_length",
                                                   "components", "noise", "drift", "seed",
                                                   "anomalies"};
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError(key + ": unknown synthetic spec key");
    }
  }
  get(j, "variables", s.variables, "");
  get(j, "train_length", s.train_length, "");
  get(j, "test_length", s.test_length, "");
  get(j, "components", s.components, "");
  get(j, "noise", s.noise, "");
  get(j, "drift", s.drift, "");
  get(j, "seed", s.seed, "");
  if (j.contains("anomalies")) {
    if (!j["anomalies"].is_array()) throw ConfigError("anomalies: expected an array");
    for (std::size_t a = 0; a < j["anomalies"].size(); ++a) {
      const auto& o = j["anomalies"][a];
      const std::string where = "anomalies[" + std::to_string(a) + "].";
      AnomalySpec an;
      std::string type = "point";
      get(o, "type", type, where);
      if (type == "point") an.type = AnomalyType::kPoint;
      else if (type == "contextual") an.type = AnomalyType::kContextual;
      else if (type == "collective") an.type = AnomalyType::kCollective;
      else throw ConfigError(where + "type: expected point, contextual or collective");
      get(o, "start", an.start, where);
      get(o, "duration", an.duration, where);
      get(o, "magnitude", an.magnitude, where);
      get(o, "variable", an.variable, where);
      s.anomalies.push_back(an);
    }
  }
  s.validate();
  return s;
}

SyntheticSpec load_synthetic_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open synthetic spec '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("synthetic spec '" + path + "' is not valid JSON: " + e.what());
  }
  return synthetic_spec_from_json(j);
}

SyntheticSpec default_synthetic_spec(std::uint64_t seed) {
  SyntheticSpec s;
  s.seed = seed;
  s.anomalies = {
      {AnomalyType::kPoint, 170, 1, 6.0, -1},
      {AnomalyType::kCollective, 330, 50, 6.0, -1},
      {AnomalyType::kPoint, 640, 1, 6.0, -1},
      {AnomalyType::kCollective, 870, 60, 6.0, -1},
      {AnomalyType::kPoint, 1160, 1, 6.0, -1},
      {AnomalyType::kPoint, 1320, 1, 6.0, -1},
      {AnomalyType::kCollective, 1490, 40, 6.0, -1},
      {AnomalyType::kPoint, 1810, 1, 6.0, -1},
  };
  return s;
}

Dataset synthesize(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const std::size_t D = spec.variables;
  const std::size_t total = spec.train_length + spec.test_length;

  struct Component {
    double amplitude, period, phase;
  };
  std::vector<std::vector<Component>> comps(D);
  for (auto& v : comps) {
    for (std::size_t c = 0; c < spec.components; ++c) {
      v.push_back({rng.uniform(0.5, 1.5), rng.uniform(20.0, 120.0),
                   rng.uniform(0.0, 2.0 * std::numbers::pi)});
    }
  }
  auto clean_at = [&](std::size_t i, double t) {
    double s = 0.0;
    for (const auto& c : comps[i]) s += c.amplitude * std::sin(2.0 * std::numbers::pi * t / c.period + c.phase);
    return s;
  };

  Matrix clean(total, D);
  for (std::size_t t = 0; t < total; ++t)
    for (std::size_t i = 0; i < D; ++i) clean(t, i) = clean_at(i, static_cast<double>(t));

  std::vector<double> mu(D, 0.0), sd(D, 0.0);
  for (std::size_t i = 0; i < D; ++i) {
    for (std::size_t t = 0; t < spec.train_length; ++t) mu[i] += clean(t, i);
    mu[i] /= static_cast<double>(spec.train_length);
    for (std::size_t t = 0; t < spec.train_length; ++t)
      sd[i] += (clean(t, i) - mu[i]) * (clean(t, i) - mu[i]);
    sd[i] = std::sqrt(sd[i] / static_cast<double>(spec.train_length));
  }

  Matrix noisy(total, D);
  for (std::size_t t = 0; t < total; ++t)
    for (std::size_t i = 0; i < D; ++i) noisy(t, i) = clean(t, i) + spec.noise * sd[i] * rng.normal();

  Dataset ds;
  ds.train.values = slice_window(noisy, 0, spec.train_length);
  ds.test.values = slice_window(noisy, spec.train_length, spec.test_length);
  for (std::size_t i = 0; i < D; ++i) {
    ds.train.names.push_back("x" + std::to_string(i));
  }
  ds.test.names = ds.train.names;
  ds.test.labels.assign(spec.test_length, 0);

  Matrix& test = ds.test.values;
  for (const auto& an : spec.anomalies) {
    for (std::size_t i = 0; i < D; ++i) {
      if (an.variable >= 0 && static_cast<std::size_t>(an.variable) != i) continue;
      // Fastest component of this variable drives the collective pattern change.
      const auto fastest = std::min_element(comps[i].begin(), comps[i].end(),
          [](const Component& a, const Component& b) { return a.period < b.period; });
      for (std::size_t t = an.start; t < an.start + an.duration; ++t) {
        const double abs_t = static_cast<double>(spec.train_length + t);
        const double base = clean(spec.train_length + t, i);
        switch (an.type) {
          case AnomalyType::kPoint:
            test(t, i) += an.magnitude * sd[i];
            break;
          case AnomalyType::kContextual:
            // Phase inversion around the mean keeps values inside the normal range.
            test(t, i) += 2.0 * (mu[i] - base);
            break;
          case AnomalyType::kCollective: {
            const double fast = fastest->amplitude *
                std::sin(2.0 * std::numbers::pi * abs_t * 3.0 / fastest->period + fastest->phase);
            const double slow = fastest->amplitude *
                std::sin(2.0 * std::numbers::pi * abs_t / fastest->period + fastest->phase);
            test(t, i) += fast - slow + an.magnitude * sd[i];
            break;
          }
        }
      }
    }
    for (std::size_t t = an.start; t < an.start + an.duration; ++t) ds.test.labels[t] = 1;
  }
  if (spec.drift != 0.0) {
    const double span = spec.test_length > 1 ? static_cast<double>(spec.test_length - 1) : 1.0;
    for (std::size_t t = 0; t < spec.test_length; ++t)
      for (std::size_t i = 0; i < D; ++i)
        test(t, i) += spec.drift * sd[i] * static_cast<double>(t) / span;
  }
  return ds;
}

}  // namespace comet
