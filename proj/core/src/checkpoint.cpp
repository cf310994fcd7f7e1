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
#include <string>

#include "finer/net.hpp"
#include "json.hpp"

namespace finer {

namespace {

constexpr int kCheckpointVersion = 1;
constexpr const char* kCheckpointFormat = "finer-checkpoint";

}  // namespace

// nlohmann::json emits the shortest decimal that round-trips a double, so
// save -> load is exact and save -> load -> save is byte-identical.
std::string save_checkpoint(const Model& model) {
  nlohmann::ordered_json doc;
  doc["format"] = kCheckpointFormat;
  doc["version"] = kCheckpointVersion;
  doc["input"] = {model.input_shape().rows, model.input_shape().cols};
  auto& layers = doc["layers"] = nlohmann::ordered_json::array();
  for (const auto& l : model.layers()) {
    nlohmann::ordered_json j;
    j["kind"] = to_string(l.spec.kind);
    if (l.spec.kind == LayerKind::kDense) j["units"] = l.spec.units;
    if (l.spec.kind == LayerKind::kConv1d) {
      j["channels"] = l.spec.channels;
      j["kernel"] = l.spec.kernel;
    }
    j["frozen"] = l.frozen;
    if (l.has_params()) {
      j["weights"] = l.weights.data;
      j["bias"] = l.bias;
    }
    layers.push_back(std::move(j));
  }
  return doc.dump(1) + "\n";
}

Model load_checkpoint(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint parse error: ") + e.what());
  }
  try {
    if (!doc.is_object() || doc.value("format", "") != kCheckpointFormat)
      throw DataError("not a finer checkpoint");
    const int version = doc.at("version").get<int>();
    if (version != kCheckpointVersion)
      throw DataError("unsupported checkpoint version " + std::to_string(version));
    const auto input = doc.at("input");
    Shape in{input.at(0).get<std::size_t>(), input.at(1).get<std::size_t>()};
    std::vector<Layer> layers;
    for (const auto& j : doc.at("layers")) {
      Layer l;
      l.spec.kind = parse_layer_kind(j.at("kind").get<std::string>());
      l.spec.units = j.value("units", std::size_t{0});
      l.spec.channels = j.value("channels", std::size_t{0});
      l.spec.kernel = j.value("kernel", std::size_t{0});
      l.frozen = j.value("frozen", false);
      if (l.has_params()) {
        l.weights.data = j.at("weights").get<std::vector<double>>();
        l.bias = j.at("bias").get<std::vector<double>>();
        l.weights.rows = l.bias.size();
        l.weights.cols = l.bias.empty() ? 0 : l.weights.data.size() / l.bias.size();
        if (l.weights.rows * l.weights.cols != l.weights.data.size())
          throw DataError("checkpoint weights are not a whole number of rows");
      }
      layers.push_back(std::move(l));
    }
    return Model::from_layers(in, std::move(layers));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  } catch (const ShapeError& e) {
    throw DataError(std::string("incompatible checkpoint: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("incompatible checkpoint: ") + e.what());
  }
}

}  // namespace finer
