#pragma once

#include "core/types.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <string_view>

namespace plotpath {

inline constexpr std::string_view kSchemaVersion = "vispath/1";
inline constexpr std::string_view kRecordFile = "record.json";
inline constexpr std::string_view kFigureDir = "figures";

nlohmann::json config_to_json(const PipelineConfig& config);

/// Overlays the keys present in `j` onto `base`. Unknown keys are ignored;
/// wrongly typed values throw Error{config} naming the key.
PipelineConfig config_from_json(const nlohmann::json& j, PipelineConfig base = {});

nlohmann::json task_to_json(const TaskInput& input);
TaskInput task_from_json(const nlohmann::json& j);

/// The record with timings, timestamps and figure paths stripped and figures
/// reduced to their digests. Two records are structurally equal iff their
/// canonical forms are byte-identical.
std::string canonical_json(const RunRecord& record);
bool structurally_equal(const RunRecord& a, const RunRecord& b);
std::string record_digest(const RunRecord& record);

/// Writes `<dir>/record.json` and one PNG per figure under `<dir>/figures/`.
/// Throws Error{storage_unavailable}.
void persist_run(const RunRecord& record, const std::filesystem::path& dir);

/// Throws Error{storage_unavailable} when the record file is absent and
/// Error{corrupt_record} when it fails to parse or its checksum disagrees.
RunRecord load_run(const std::filesystem::path& dir);

bool has_record(const std::filesystem::path& dir);

} // namespace plotpath
