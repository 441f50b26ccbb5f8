// Copyright 2026 The Flowforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <json.hpp>

#include "flowforge/retriever.hpp"
#include "flowforge/validate.hpp"
#include "flowforge/workflow.hpp"

namespace flowforge {

using Json = nlohmann::json;

/// {kind, query, scope, k, forced, choices: [{payload, score, id}]}
Json choices_to_json(const RankedChoices& choices);
RankedChoices choices_from_json(const Json& j);

Json artifact_to_json(const ArtifactDoc& doc);

/// {trigger: {...}, rows: [{name, annotation, order, block}]}
Json outline_to_json(const Outline& outline);
Json trigger_to_json(const Trigger& trigger);

/// {code, message, location}
Json violation_to_json(const Violation& violation);
Json report_to_json(const ValidationReport& report);

}  // namespace flowforge
