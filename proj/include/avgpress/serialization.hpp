#pragma once

#include <json.hpp>

#include "avgpress/dataset.hpp"
#include "avgpress/errors.hpp"
#include "avgpress/surrogate.hpp"

namespace avgpress {

using Json = nlohmann::ordered_json;

void to_json(Json& j, const MeshParams& p);
void from_json(const Json& j, MeshParams& p);
void to_json(Json& j, const FrequencyRange& r);
void from_json(const Json& j, FrequencyRange& r);
void to_json(Json& j, const LabelConfig& c);
void from_json(const Json& j, LabelConfig& c);
void to_json(Json& j, const DatasetStats& s);
void from_json(const Json& j, DatasetStats& s);
void to_json(Json& j, const DatasetManifest& m);
void from_json(const Json& j, DatasetManifest& m);
void to_json(Json& j, const TrainConfig& c);
void from_json(const Json& j, TrainConfig& c);

// Runs `fn` and converts nlohmann exceptions into ParseError.
template <class F>
auto with_json_errors(const std::string& context, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(context + ": " + e.what(), 0);
  }
}

}  // namespace avgpress
