#include "emrld/io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace emrld {

json vec_to_json(const Vec& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

Vec vec_from_json(const json& j) {
  if (!j.is_array()) throw std::invalid_argument("expected a numeric array");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw std::invalid_argument("expected a numeric array");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

namespace {

json rows_to_json(const std::vector<Vec>& rows) {
  json arr = json::array();
  for (const auto& r : rows) arr.push_back(vec_to_json(r));
  return arr;
}

std::vector<Vec> rows_from_json(const json& j) {
  if (!j.is_array()) throw std::invalid_argument("expected an array of arrays");
  std::vector<Vec> rows;
  rows.reserve(j.size());
  for (const auto& r : j) rows.push_back(vec_from_json(r));
  return rows;
}

DoneReason parse_done_reason(const std::string& s) {
  if (s == "goal") return DoneReason::Goal;
  if (s == "timeout") return DoneReason::Timeout;
  if (s == "out_of_bounds") return DoneReason::OutOfBounds;
  return DoneReason::Running;
}

}  // namespace

json trajectory_to_json(const Trajectory& t) {
  json j;
  j["task_id"] = t.task_id;
  j["states"] = rows_to_json(t.states);
  j["actions"] = rows_to_json(t.actions);
  j["rewards"] = t.rewards;
  j["times"] = t.times;
  if (t.final_state.size() > 0) j["final_state"] = vec_to_json(t.final_state);
  j["done_reason"] = to_string(t.done_reason);
  return j;
}

Trajectory trajectory_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("trajectory record must be an object");
  for (const char* key : {"task_id", "states", "actions"}) {
    if (!j.contains(key)) throw std::invalid_argument(std::string("trajectory record missing '") + key + "'");
  }
  Trajectory t;
  t.task_id = j.at("task_id").get<int>();
  t.states = rows_from_json(j.at("states"));
  t.actions = rows_from_json(j.at("actions"));
  if (j.contains("rewards")) {
    t.rewards = j.at("rewards").get<std::vector<double>>();
  } else {
    t.rewards.assign(t.states.size(), 0.0);
  }
  if (j.contains("times")) {
    t.times = j.at("times").get<std::vector<int>>();
  } else {
    for (std::size_t i = 0; i < t.states.size(); ++i) t.times.push_back(static_cast<int>(i));
  }
  if (j.contains("final_state")) t.final_state = vec_from_json(j.at("final_state"));
  if (j.contains("done_reason")) t.done_reason = parse_done_reason(j.at("done_reason").get<std::string>());
  t.validate();
  return t;
}

json task_to_json(EnvKind kind, const Task& task) {
  if (kind == EnvKind::TwoWheeledDrift) return json{{"drift", task.drift}};
  return json{{"goal", json::array({task.goal_x, task.goal_y})}};
}

Task task_from_json(EnvKind kind, const json& j) {
  Task t;
  if (kind == EnvKind::TwoWheeledDrift) {
    if (!j.contains("drift")) throw std::invalid_argument("drift task record missing 'drift'");
    const json& d = j.at("drift");
    t.drift = d.is_array() ? d.at(0).get<double>() : d.get<double>();
    t.goal_x = kDriftGoalX;
    t.goal_y = kDriftGoalY;
  } else {
    if (!j.contains("goal") || j.at("goal").size() != 2) throw std::invalid_argument("task record needs goal [x, y]");
    t.goal_x = j.at("goal")[0].get<double>();
    t.goal_y = j.at("goal")[1].get<double>();
  }
  return t;
}

json tasks_to_json(EnvKind kind, const std::vector<Task>& tasks) {
  json j;
  j["kind"] = to_string(kind);
  if (kind == EnvKind::TwoWheeledDrift) {
    json d = json::array();
    for (const auto& t : tasks) d.push_back(t.drift);
    j["drifts"] = d;
  } else {
    json g = json::array();
    for (const auto& t : tasks) g.push_back(json::array({t.goal_x, t.goal_y}));
    j["goals"] = g;
  }
  return j;
}

std::vector<Task> tasks_from_json(const json& j, EnvKind* kind_out) {
  const EnvKind kind = parse_env_kind(j.at("kind").get<std::string>());
  if (kind_out) *kind_out = kind;
  std::vector<Task> tasks;
  if (kind == EnvKind::TwoWheeledDrift) {
    for (const auto& d : j.at("drifts")) tasks.push_back(Task{kDriftGoalX, kDriftGoalY, d.get<double>()});
  } else {
    for (const auto& g : j.at("goals")) tasks.push_back(Task{g.at(0).get<double>(), g.at(1).get<double>(), 0.0});
  }
  return tasks;
}

void write_trajectories_jsonl(const std::filesystem::path& path, const std::vector<Trajectory>& trajectories) {
  std::ostringstream out;
  for (const auto& t : trajectories) {
    json j;
    j["task_id"] = t.task_id;
    j["states"] = rows_to_json(t.states);
    j["actions"] = rows_to_json(t.actions);
    j["rewards"] = t.rewards;
    out << j.dump() << '\n';
  }
  write_text_file(path, out.str());
}

std::vector<Trajectory> read_trajectories_jsonl(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::vector<Trajectory> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(trajectory_from_json(json::parse(line)));
  }
  return out;
}

json policy_to_json(const GaussianPolicy& policy) {
  json j;
  j["layer_sizes"] = policy.net.layer_sizes();
  j["sigma"] = vec_to_json(policy.sigma);
  j["params"] = vec_to_json(flatten(policy.net));
  return j;
}

GaussianPolicy policy_from_json(const json& j) {
  const auto sizes = j.at("layer_sizes").get<std::vector<int>>();
  GaussianPolicy p{unflatten(vec_from_json(j.at("params")), sizes), vec_from_json(j.at("sigma"))};
  p.validate();
  return p;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace emrld
