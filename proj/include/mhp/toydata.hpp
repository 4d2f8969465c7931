#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mhp/models.hpp"
#include "mhp/tensor.hpp"

namespace mhp::toy {

enum class Destination : int { Left = 0, Straight = 1, Right = 2 };

char destination_code(Destination d);
Destination destination_from_code(char c);

/// One simulated vehicle run: points in abstract map units, plus the exit it
/// eventually takes.
struct Trajectory {
  int id = 0;
  Destination destination = Destination::Straight;
  std::vector<Point2> points;
};

/// Three-way intersection layout. The approach lane runs from (0, -L) north to
/// the fork at the origin; exits head west, north and east with a
/// quarter-circle arc at each turn. Vehicles move at a constant nominal speed
/// with i.i.d. Gaussian jitter per point.
struct GeometryConfig {
  double approach_length = 100.0;
  double turn_radius = 10.0;
  double speed = 2.0;
  double noise_sigma = 1.5;
};

/// Noise-free backbone position at arc length s for a destination.
Point2 path_point(const GeometryConfig& g, Destination dest, double s);

std::vector<Trajectory> generate_intersection(int num_trajectories, int points_per_trajectory,
                                              std::uint64_t seed,
                                              const GeometryConfig& geometry = {});

// ---------------------------------------------------------------------------
// Task sample assembly
// ---------------------------------------------------------------------------

/// x = coordinates, y = destination id repeated at every step.
std::vector<models::SequenceSample> make_classification_samples(
    const std::vector<Trajectory>& trajectories);

/// x = first `prefix` points, y = the remaining points.
std::vector<models::SequenceSample> make_prediction_samples(
    const std::vector<Trajectory>& trajectories, std::size_t prefix);

/// Teacher forcing pairs: x = points[0..n-1), y = points[1..n).
std::vector<models::SequenceSample> make_generation_samples(
    const std::vector<Trajectory>& trajectories);

// ---------------------------------------------------------------------------
// Splits and serialization
// ---------------------------------------------------------------------------

struct DatasetSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

/// Seeded shuffle, then a 60-20-20 cut (sizes rounded, +-1 sample).
DatasetSplit split_dataset(std::size_t num_samples, std::uint64_t seed);

/// JSON-lines, one record per trajectory:
///   {"id": 0, "dest": "L", "pts": [[x, y], ...]}
void save_trajectories(const std::vector<Trajectory>& trajectories, const std::string& path);
std::vector<Trajectory> load_trajectories(const std::string& path);

void save_split(const DatasetSplit& split, const std::string& path);
DatasetSplit load_split(const std::string& path);

}  // namespace mhp::toy
