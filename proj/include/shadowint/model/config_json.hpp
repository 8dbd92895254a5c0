// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "json.hpp"
#include "shadowint/model/model.hpp"

namespace shadowint {

nlohmann::ordered_json model_config_to_json(const ModelConfig& cfg);

/// Overlays the keys present in `j` onto `base`. Unknown keys are rejected.
ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig base = {});

}  // namespace shadowint
