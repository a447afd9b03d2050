#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "emrld/envs.hpp"
#include "emrld/nn.hpp"
#include "emrld/rollout.hpp"

namespace emrld {

using json = nlohmann::json;

json vec_to_json(const Vec& v);
Vec vec_from_json(const json& j);

json trajectory_to_json(const Trajectory& t);
Trajectory trajectory_from_json(const json& j);

/// {kind, goals:[[x,y],...]} or {kind, drifts:[...]}.
json tasks_to_json(EnvKind kind, const std::vector<Task>& tasks);
std::vector<Task> tasks_from_json(const json& j, EnvKind* kind = nullptr);

json task_to_json(EnvKind kind, const Task& task);
Task task_from_json(EnvKind kind, const json& j);

/// One JSON object per line: {task_id, states, actions, rewards}.
void write_trajectories_jsonl(const std::filesystem::path& path, const std::vector<Trajectory>& trajectories);
std::vector<Trajectory> read_trajectories_jsonl(const std::filesystem::path& path);

/// Shape header plus the flat parameter array (see MlpParams for the layout).
json policy_to_json(const GaussianPolicy& policy);
GaussianPolicy policy_from_json(const json& j);

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace emrld
