#include "mhp/toydata.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "mhp/error.hpp"
#include "mhp/rng.hpp"

namespace mhp::toy {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

char destination_code(Destination d) {
  switch (d) {
    case Destination::Left: return 'L';
    case Destination::Straight: return 'S';
    case Destination::Right: return 'R';
  }
  throw ContractError("destination_code: invalid destination");
}

Destination destination_from_code(char c) {
  switch (c) {
    case 'L': return Destination::Left;
    case 'S': return Destination::Straight;
    case 'R': return Destination::Right;
    default: throw IoError(std::string("unknown destination code: ") + c);
  }
}

Point2 path_point(const GeometryConfig& g, Destination dest, double s) {
  const double l = g.approach_length;
  if (s <= l) return {0.0, s - l};
  if (dest == Destination::Straight) return {0.0, s - l};
  const double r = g.turn_radius;
  const double arc = 0.5 * kPi * r;
  const double sign = dest == Destination::Left ? -1.0 : 1.0;
  if (s <= l + arc) {
    const double phi = (s - l) / r;
    return {sign * r * (1.0 - std::cos(phi)), r * std::sin(phi)};
  }
  return {sign * (r + (s - l - arc)), r};
}

std::vector<Trajectory> generate_intersection(int num_trajectories, int points_per_trajectory,
                                              std::uint64_t seed,
                                              const GeometryConfig& geometry) {
  require(num_trajectories > 0 && points_per_trajectory > 0,
          "generate_intersection: counts must be positive");
  Rng base(seed);
  std::vector<Trajectory> out;
  out.reserve(static_cast<std::size_t>(num_trajectories));
  for (int i = 0; i < num_trajectories; ++i) {
    Rng rng = base.split(static_cast<std::uint64_t>(i));
    Trajectory t;
    t.id = i;
    t.destination = static_cast<Destination>(rng.below(3));
    t.points.reserve(static_cast<std::size_t>(points_per_trajectory));
    for (int k = 0; k < points_per_trajectory; ++k) {
      Point2 p = path_point(geometry, t.destination, geometry.speed * static_cast<double>(k));
      p.x += geometry.noise_sigma * rng.normal();
      p.y += geometry.noise_sigma * rng.normal();
      t.points.push_back(p);
    }
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<models::SequenceSample> make_classification_samples(
    const std::vector<Trajectory>& trajectories) {
  std::vector<models::SequenceSample> out;
  out.reserve(trajectories.size());
  for (const Trajectory& t : trajectories) {
    models::SequenceSample s;
    s.input = t.points;
    s.class_targets.assign(t.points.size(), static_cast<int>(t.destination));
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<models::SequenceSample> make_prediction_samples(
    const std::vector<Trajectory>& trajectories, std::size_t prefix) {
  std::vector<models::SequenceSample> out;
  out.reserve(trajectories.size());
  for (const Trajectory& t : trajectories) {
    require(prefix >= 1 && prefix < t.points.size(),
            "make_prediction_samples: prefix must be shorter than the trajectory");
    models::SequenceSample s;
    s.input.assign(t.points.begin(), t.points.begin() + static_cast<std::ptrdiff_t>(prefix));
    s.coord_targets.assign(t.points.begin() + static_cast<std::ptrdiff_t>(prefix),
                           t.points.end());
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<models::SequenceSample> make_generation_samples(
    const std::vector<Trajectory>& trajectories) {
  std::vector<models::SequenceSample> out;
  out.reserve(trajectories.size());
  for (const Trajectory& t : trajectories) {
    require(t.points.size() >= 2, "make_generation_samples: need at least two points");
    models::SequenceSample s;
    s.input.assign(t.points.begin(), t.points.end() - 1);
    s.coord_targets.assign(t.points.begin() + 1, t.points.end());
    out.push_back(std::move(s));
  }
  return out;
}

DatasetSplit split_dataset(std::size_t num_samples, std::uint64_t seed) {
  require(num_samples >= 5, "split_dataset: need at least 5 samples");
  std::vector<std::size_t> idx(num_samples);
  for (std::size_t i = 0; i < num_samples; ++i) idx[i] = i;
  Rng rng(seed ^ 0x5f3759df9e3779b9ull);
  for (std::size_t i = num_samples; i-- > 1;) {
    const std::size_t j = rng.below(i + 1);
    std::swap(idx[i], idx[j]);
  }
  const std::size_t n_train =
      static_cast<std::size_t>(std::llround(0.6 * static_cast<double>(num_samples)));
  const std::size_t n_val =
      static_cast<std::size_t>(std::llround(0.2 * static_cast<double>(num_samples)));
  DatasetSplit split;
  split.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.validation.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train),
                          idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  split.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), idx.end());
  return split;
}

void save_trajectories(const std::vector<Trajectory>& trajectories, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  for (const Trajectory& t : trajectories) {
    nlohmann::json rec;
    rec["id"] = t.id;
    rec["dest"] = std::string(1, destination_code(t.destination));
    auto pts = nlohmann::json::array();
    for (const Point2& p : t.points) pts.push_back({p.x, p.y});
    rec["pts"] = std::move(pts);
    out << rec.dump() << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

std::vector<Trajectory> load_trajectories(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset: " + path);
  std::vector<Trajectory> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw IoError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    Trajectory t;
    t.id = rec.at("id").get<int>();
    const std::string dest = rec.at("dest").get<std::string>();
    require(dest.size() == 1, "dest must be a single character");
    t.destination = destination_from_code(dest[0]);
    for (const auto& p : rec.at("pts")) {
      t.points.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    }
    out.push_back(std::move(t));
  }
  return out;
}

void save_split(const DatasetSplit& split, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  nlohmann::json rec;
  rec["train"] = split.train;
  rec["validation"] = split.validation;
  rec["test"] = split.test;
  out << rec.dump() << '\n';
  if (!out) throw IoError("write failed: " + path);
}

DatasetSplit load_split(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open split file: " + path);
  nlohmann::json rec;
  try {
    in >> rec;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path + ": " + e.what());
  }
  DatasetSplit split;
  split.train = rec.at("train").get<std::vector<std::size_t>>();
  split.validation = rec.at("validation").get<std::vector<std::size_t>>();
  split.test = rec.at("test").get<std::vector<std::size_t>>();
  return split;
}

}  // namespace mhp::toy
