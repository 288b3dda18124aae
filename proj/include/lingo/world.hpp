#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lingo/autodiff.hpp"
#include "lingo/rng.hpp"

namespace lingo {

enum class Direction : int { kNorth = 0, kSouth = 1, kEast = 2, kWest = 3 };

inline constexpr std::array<Direction, 4> kDirections = {Direction::kNorth, Direction::kSouth,
                                                         Direction::kEast, Direction::kWest};

std::string_view direction_name(Direction d);
std::optional<Direction> parse_direction(std::string_view name);

inline constexpr std::size_t kGridSide = 3;
inline constexpr std::size_t kGridCells = kGridSide * kGridSide;

// Row-major cell index of the grid position a direction refers to; the
// learner sits at the center cell (4).
std::size_t direction_cell(Direction d);

using ObjectId = std::size_t;  // index into the object lexicon

inline const std::vector<std::string> kDefaultObjects = {
    "apple", "avocado", "banana", "cherry", "orange", "cucumber", "strawberry", "cabbage"};

struct WorldState {
  std::array<ObjectId, 4> placement{};  // indexed by Direction
  std::uint64_t episode_seed = 0;

  ObjectId at(Direction d) const { return placement[static_cast<int>(d)]; }
  std::optional<Direction> where(ObjectId object) const;
  bool operator==(const WorldState& other) const { return placement == other.placement; }
};

// One-hot object channels over the 3x3 grid: grid has shape [num_objects, 3, 3].
struct Scene {
  ad::Tensor grid;
};

// Uniform ordered 4-subset of the lexicon; throws ConfigError below 4 objects.
WorldState sample_world(std::size_t num_objects, Rng& rng);

Scene render_scene(const WorldState& world, std::size_t num_objects);

std::string describe_world(const WorldState& world, const std::vector<std::string>& objects);

}  // namespace lingo
