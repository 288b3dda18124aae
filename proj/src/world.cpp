#include "lingo/world.hpp"

#include <algorithm>

#include "lingo/errors.hpp"

namespace lingo {

std::string_view direction_name(Direction d) {
  switch (d) {
    case Direction::kNorth: return "north";
    case Direction::kSouth: return "south";
    case Direction::kEast: return "east";
    case Direction::kWest: return "west";
  }
  return "?";
}

std::optional<Direction> parse_direction(std::string_view name) {
  for (Direction d : kDirections) {
    if (direction_name(d) == name) return d;
  }
  return std::nullopt;
}

std::size_t direction_cell(Direction d) {
  switch (d) {
    case Direction::kNorth: return 0 * kGridSide + 1;
    case Direction::kSouth: return 2 * kGridSide + 1;
    case Direction::kWest: return 1 * kGridSide + 0;
    case Direction::kEast: return 1 * kGridSide + 2;
  }
  return 4;
}

std::optional<Direction> WorldState::where(ObjectId object) const {
  for (Direction d : kDirections) {
    if (at(d) == object) return d;
  }
  return std::nullopt;
}

WorldState sample_world(std::size_t num_objects, Rng& rng) {
  if (num_objects < 4) {
    throw ConfigError("sample_world needs at least 4 objects, got " + std::to_string(num_objects));
  }
  WorldState world;
  world.episode_seed = rng.next_u64();
  const auto picks = rng.sample_without_replacement(num_objects, 4);
  std::copy(picks.begin(), picks.end(), world.placement.begin());
  return world;
}

Scene render_scene(const WorldState& world, std::size_t num_objects) {
  std::vector<double> grid(num_objects * kGridCells, 0.0);
  for (Direction d : kDirections) {
    const ObjectId object = world.at(d);
    if (object >= num_objects) throw ContractError("render_scene: object id out of range");
    grid[object * kGridCells + direction_cell(d)] = 1.0;
  }
  return Scene{ad::Tensor({num_objects, kGridSide, kGridSide}, std::move(grid))};
}

std::string describe_world(const WorldState& world, const std::vector<std::string>& objects) {
  std::string out;
  for (Direction d : kDirections) {
    if (!out.empty()) out += ' ';
    out += std::string(direction_name(d)) + "=" + objects.at(world.at(d));
  }
  return out;
}

}  // namespace lingo
