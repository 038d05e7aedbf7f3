#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "semvis/evaluation.hpp"
#include "semvis/image_io.hpp"
#include "semvis/text.hpp"

namespace semvis {

enum class ShapeKind : std::uint8_t { kCircle, kSquare, kTriangle, kCross };
enum class Color : std::uint8_t { kRed, kGreen, kBlue, kYellow, kMagenta, kCyan };

inline constexpr std::array<const char*, 4> kShapeNames{"circle", "square", "triangle", "cross"};
inline constexpr std::array<const char*, 6> kColorNames{"red", "green", "blue", "yellow", "magenta", "cyan"};

const char* to_string(ShapeKind shape);
const char* to_string(Color color);
std::optional<ShapeKind> parse_shape(const std::string& name);
std::optional<Color> parse_color(const std::string& name);

struct SceneObject {
    ShapeKind shape = ShapeKind::kCircle;
    Color color = Color::kRed;
    BoundingBox box;

    /// "a {color} {shape}"
    std::string phrase() const;
    bool operator==(const SceneObject&) const = default;
};

struct Region {
    std::string phrase;
    BoundingBox box;
    bool operator==(const Region&) const = default;
};

struct Scene {
    std::size_t id = 0;
    RgbImage image;
    std::vector<SceneObject> objects;
    std::vector<std::string> captions;
    std::vector<Region> regions;  // one per object

    bool operator==(const Scene&) const = default;
};

/// Objects sit in distinct cells of a grid×grid partition of a square canvas,
/// jittered inside their cell, so they never overlap.
struct GridConfig {
    std::size_t canvas = 64;
    std::size_t grid = 2;
    std::size_t min_objects = 2;
    std::size_t max_objects = 3;
    std::size_t min_size = 20;
    std::size_t max_size = 28;

    void validate() const;
};

inline constexpr std::size_t kCaptionsPerScene = 5;

/// Image, objects and regions; captions are left empty.
Scene generate_scene(std::uint64_t seed, const GridConfig& grid = {});

/// Five captions built from the templates "a {c} {s}", "the {s} is {c}" and
/// "a {c} {s} and a {c} {s}". Scenes with two or more objects always get at
/// least one two-object caption; captions are distinct whenever the scene
/// admits five distinct ones.
std::vector<std::string> caption_scene(const Scene& scene, std::uint64_t seed);

struct Dataset {
    std::vector<Scene> scenes;
    TokenVocab vocab;

    bool operator==(const Dataset& other) const {
        return scenes == other.scenes && vocab == other.vocab;
    }
};

Dataset generate_dataset(std::size_t scene_count, std::uint64_t seed, const GridConfig& grid = {});

/// <dir>/manifest.jsonl, <dir>/images/NNNNNN.ppm, <dir>/vocab.txt
void write_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset read_dataset(const std::filesystem::path& dir);

struct DatasetSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
    std::vector<std::size_t> test;
};

/// Seeded permutation cut into disjoint train / val / test index sets.
DatasetSplit split_indices(std::size_t count, double train_fraction, double val_fraction,
                           std::uint64_t seed);

Dataset subset(const Dataset& dataset, std::span<const std::size_t> indices);

/// Every region of every scene as a pointing-game query.
std::vector<RegionQuery> region_queries(const Dataset& dataset);

}  // namespace semvis
