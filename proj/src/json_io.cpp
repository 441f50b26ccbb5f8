// Copyright 2026 The Flowforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "flowforge/json_io.hpp"

namespace flowforge {

Json choices_to_json(const RankedChoices& rc) {
  Json list = Json::array();
  for (const auto& c : rc.choices) list.push_back({{"payload", c.payload}, {"score", c.score}, {"id", c.id}});
  return {{"kind", std::string(artifact_kind_name(rc.kind))},
          {"query", rc.query},
          {"scope", rc.scope},
          {"k", rc.k},
          {"forced", rc.forced},
          {"choices", list}};
}

RankedChoices choices_from_json(const Json& j) {
  RankedChoices rc;
  const auto kind = parse_artifact_kind(j.at("kind").get<std::string>());
  if (!kind) throw SyntaxError("unknown artifact kind " + j.at("kind").dump(), 0, 0);
  rc.kind = *kind;
  rc.query = j.value("query", "");
  rc.scope = j.value("scope", "");
  rc.k = j.value("k", kDefaultChoices);
  rc.forced = j.value("forced", false);
  for (const auto& c : j.at("choices")) {
    rc.choices.push_back({c.at("payload").get<std::string>(), c.value("score", 0.0), c.value("id", "")});
  }
  return rc;
}

Json artifact_to_json(const ArtifactDoc& doc) {
  return {{"id", doc.id},
          {"kind", std::string(artifact_kind_name(doc.kind))},
          {"payload", doc.payload},
          {"text", doc.text},
          {"scope", doc.scope}};
}

Json trigger_to_json(const Trigger& trigger) {
  Json j = {{"event", std::string(event_name(trigger.event))}};
  if (!trigger.table.empty()) j["table"] = trigger.table;
  if (trigger.condition) j["condition"] = encode_condition(*trigger.condition);
  if (trigger.schedule) j["schedule"] = *trigger.schedule;
  return j;
}

Json outline_to_json(const Outline& outline) {
  Json rows = Json::array();
  for (const auto& row : outline.rows) {
    rows.push_back({{"name", row.name},
                    {"annotation", row.annotation},
                    {"order", row.order},
                    {"block", row.block}});
  }
  return {{"trigger", trigger_to_json(outline.trigger)}, {"rows", rows}};
}

Json violation_to_json(const Violation& v) {
  return {{"code", std::string(violation_code_name(v.code))},
          {"message", v.message},
          {"location", v.location.to_string()}};
}

Json report_to_json(const ValidationReport& report) {
  Json list = Json::array();
  for (const auto& v : report.violations) list.push_back(violation_to_json(v));
  return {{"ok", report.ok()}, {"violations", list}};
}

}  // namespace flowforge
