#include "mhp/config.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "mhp/error.hpp"

namespace mhp::harness {

std::string task_name(Task t) {
  switch (t) {
    case Task::ToyClassification: return "toy-classification";
    case Task::ToyPrediction: return "toy-prediction";
    case Task::ToyGeneration: return "toy-generation";
  }
  throw ContractError("task_name: invalid task");
}

std::string model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::Shp: return "shp";
    case ModelKind::ShpStar: return "shp-star";
    case ModelKind::Mcl: return "mcl";
    case ModelKind::Mhp: return "mhp";
  }
  throw ContractError("model_kind_name: invalid kind");
}

Task task_from_name(const std::string& s) {
  if (s == "toy-classification") return Task::ToyClassification;
  if (s == "toy-prediction") return Task::ToyPrediction;
  if (s == "toy-generation") return Task::ToyGeneration;
  throw IoError("unknown task: " + s);
}

ModelKind model_kind_from_name(const std::string& s) {
  if (s == "shp") return ModelKind::Shp;
  if (s == "shp-star") return ModelKind::ShpStar;
  if (s == "mcl") return ModelKind::Mcl;
  if (s == "mhp") return ModelKind::Mhp;
  throw IoError("unknown model kind: " + s);
}

void ExperimentConfig::validate() const {
  require(num_hypotheses >= 1, "config: m must be at least 1");
  require(epsilon >= 0.0 && epsilon < 1.0, "config: epsilon must be in [0, 1)");
  require(gamma >= 0.0 && gamma < 1.0, "config: gamma must be in [0, 1)");
  require(tau > 0.0 && tau <= 1.0, "config: tau must be in (0, 1]");
  require(hidden_dim >= 1 && batch_size >= 1, "config: dimensions must be positive");
  require(learning_rate > 0.0, "config: learning_rate must be positive");
  require(max_epochs >= 1 && patience >= 0, "config: bad epoch settings");
  require(input_scale > 0.0, "config: input_scale must be positive");
  if (model == ModelKind::ShpStar) {
    require(task == Task::ToyClassification, "config: shp-star applies to classification only");
  } else {
    require(gamma == 0.0, "config: gamma is only meaningful for shp-star");
  }
  if (model == ModelKind::Mcl) {
    require(task != Task::ToyGeneration, "config: mcl does not extend to sequence generation");
    require(num_hypotheses >= 2, "config: mcl needs at least 2 members");
  }
  if (model == ModelKind::Shp || model == ModelKind::ShpStar) {
    require(num_hypotheses == 1, "config: single-hypothesis models use m=1");
  }
  if (task == Task::ToyGeneration) {
    require(tree_depth >= 1 && infer_steps >= 1 && split_threshold > 0.0,
            "config: bad inference settings");
    require(seed_points >= 1, "config: seed_points must be at least 1");
  }
  if (task == Task::ToyPrediction) {
    require(prefix_length >= 1, "config: prefix_length must be at least 1");
  }
}

std::string ExperimentConfig::to_text() const {
  std::ostringstream out;
  out.precision(17);
  out << "name=" << name << '\n';
  out << "task=" << task_name(task) << '\n';
  out << "model=" << model_kind_name(model) << '\n';
  out << "m=" << num_hypotheses << '\n';
  out << "epsilon=" << epsilon << '\n';
  out << "gamma=" << gamma << '\n';
  out << "tau=" << tau << '\n';
  out << "hidden_dim=" << hidden_dim << '\n';
  out << "batch_size=" << batch_size << '\n';
  out << "learning_rate=" << learning_rate << '\n';
  out << "max_epochs=" << max_epochs << '\n';
  out << "patience=" << patience << '\n';
  out << "seed=" << seed << '\n';
  out << "tree_depth=" << tree_depth << '\n';
  out << "infer_steps=" << infer_steps << '\n';
  out << "split_threshold=" << split_threshold << '\n';
  out << "seed_points=" << seed_points << '\n';
  out << "prefix_length=" << prefix_length << '\n';
  out << "data=" << data_path << '\n';
  out << "input_scale=" << input_scale << '\n';
  out << "eval_limit=" << eval_limit << '\n';
  out << "threads=" << threads << '\n';
  return out.str();
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw IoError("config: expected key=value, got: " + t);
    kv[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }

  ExperimentConfig cfg;
  auto take = [&](const char* key) -> std::string {
    auto it = kv.find(key);
    if (it == kv.end()) return "";
    std::string v = it->second;
    kv.erase(it);
    return v;
  };
  std::string v;
  if (!(v = take("name")).empty()) cfg.name = v;
  if (!(v = take("task")).empty()) cfg.task = task_from_name(v);
  if (!(v = take("model")).empty()) cfg.model = model_kind_from_name(v);
  if (!(v = take("m")).empty()) cfg.num_hypotheses = std::stoi(v);
  if (!(v = take("epsilon")).empty()) cfg.epsilon = std::stod(v);
  if (!(v = take("gamma")).empty()) cfg.gamma = std::stod(v);
  if (!(v = take("tau")).empty()) cfg.tau = std::stod(v);
  if (!(v = take("hidden_dim")).empty()) cfg.hidden_dim = std::stoi(v);
  if (!(v = take("batch_size")).empty()) cfg.batch_size = std::stoi(v);
  if (!(v = take("learning_rate")).empty()) cfg.learning_rate = std::stod(v);
  if (!(v = take("max_epochs")).empty()) cfg.max_epochs = std::stoi(v);
  if (!(v = take("patience")).empty()) cfg.patience = std::stoi(v);
  if (!(v = take("seed")).empty()) cfg.seed = std::stoull(v);
  if (!(v = take("tree_depth")).empty()) cfg.tree_depth = std::stoi(v);
  if (!(v = take("infer_steps")).empty()) cfg.infer_steps = std::stoi(v);
  if (!(v = take("split_threshold")).empty()) cfg.split_threshold = std::stod(v);
  if (!(v = take("seed_points")).empty()) cfg.seed_points = std::stoi(v);
  if (!(v = take("prefix_length")).empty()) cfg.prefix_length = std::stoi(v);
  if (!(v = take("data")).empty()) cfg.data_path = v;
  if (!(v = take("input_scale")).empty()) cfg.input_scale = std::stod(v);
  if (!(v = take("eval_limit")).empty()) cfg.eval_limit = std::stoi(v);
  if (!(v = take("threads")).empty()) cfg.threads = std::stoi(v);
  if (!kv.empty()) throw IoError("config: unknown key: " + kv.begin()->first);
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

}  // namespace mhp::harness
