#include "semvis/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>

#include <json.hpp>

namespace semvis {

namespace {

using nlohmann::json;

constexpr std::array<std::array<std::uint8_t, 3>, 6> kPalette{{
    {220, 40, 40},    // red
    {40, 200, 60},    // green
    {50, 80, 230},    // blue
    {230, 220, 50},   // yellow
    {220, 60, 220},   // magenta
    {60, 210, 220},   // cyan
}};

constexpr std::uint8_t kBackground = 30;
constexpr int kBackgroundJitter = 8;

bool covers(ShapeKind shape, double u, double v) {
    // (u, v) in [0,1)^2 relative to the object box, v growing downwards.
    const double dx = u - 0.5;
    const double dy = v - 0.5;
    switch (shape) {
        case ShapeKind::kCircle:
            return dx * dx + dy * dy <= 0.25;
        case ShapeKind::kSquare:
            return std::abs(dx) <= 0.42 && std::abs(dy) <= 0.42;
        case ShapeKind::kTriangle:
            return std::abs(dx) <= 0.5 * v;
        case ShapeKind::kCross:
            return std::abs(dx) <= 1.0 / 6.0 || std::abs(dy) <= 1.0 / 6.0;
    }
    return false;
}

void draw(RgbImage& image, const SceneObject& obj) {
    const auto& rgb = kPalette[static_cast<std::size_t>(obj.color)];
    const auto x0 = static_cast<std::size_t>(obj.box.x);
    const auto y0 = static_cast<std::size_t>(obj.box.y);
    const auto w = static_cast<std::size_t>(obj.box.width);
    const auto h = static_cast<std::size_t>(obj.box.height);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            const double u = (static_cast<double>(x) + 0.5) / static_cast<double>(w);
            const double v = (static_cast<double>(y) + 0.5) / static_cast<double>(h);
            if (covers(obj.shape, u, v)) {
                for (std::size_t c = 0; c < 3; ++c) image.at(x0 + x, y0 + y, c) = rgb[c];
            }
        }
    }
}

std::string pair_caption(const SceneObject& a, const SceneObject& b) {
    return a.phrase() + " and " + b.phrase();
}

std::string attribute_caption(const SceneObject& o) {
    return std::string("the ") + to_string(o.shape) + " is " + to_string(o.color);
}

std::string image_name(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "images/%06zu.ppm", index);
    return buf;
}

BoundingBox parse_box(const json& j) {
    if (!j.is_array() || j.size() != 4) {
        throw FormatError("bbox must be an array [x, y, w, h]");
    }
    for (const auto& v : j) {
        if (!v.is_number()) throw FormatError("bbox entries must be numbers");
    }
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

json box_json(const BoundingBox& b) {
    const auto integral = [](double v) { return v == std::floor(v); };
    if (integral(b.x) && integral(b.y) && integral(b.width) && integral(b.height)) {
        return json::array({static_cast<long long>(b.x), static_cast<long long>(b.y),
                            static_cast<long long>(b.width), static_cast<long long>(b.height)});
    }
    return json::array({b.x, b.y, b.width, b.height});
}

std::optional<SceneObject> object_from_phrase(const std::string& phrase, const BoundingBox& box) {
    const auto words = split_words(phrase);
    if (words.size() != 3 || words[0] != "a") return std::nullopt;
    const auto color = parse_color(words[1]);
    const auto shape = parse_shape(words[2]);
    if (!color || !shape) return std::nullopt;
    return SceneObject{*shape, *color, box};
}

}  // namespace

const char* to_string(ShapeKind shape) { return kShapeNames[static_cast<std::size_t>(shape)]; }
const char* to_string(Color color) { return kColorNames[static_cast<std::size_t>(color)]; }

std::optional<ShapeKind> parse_shape(const std::string& name) {
    for (std::size_t i = 0; i < kShapeNames.size(); ++i) {
        if (name == kShapeNames[i]) return static_cast<ShapeKind>(i);
    }
    return std::nullopt;
}

std::optional<Color> parse_color(const std::string& name) {
    for (std::size_t i = 0; i < kColorNames.size(); ++i) {
        if (name == kColorNames[i]) return static_cast<Color>(i);
    }
    return std::nullopt;
}

std::string SceneObject::phrase() const {
    return std::string("a ") + to_string(color) + " " + to_string(shape);
}

void GridConfig::validate() const {
    if (grid == 0 || canvas % grid != 0) {
        throw GenerationError("canvas " + std::to_string(canvas) + " is not divisible into a " +
                              std::to_string(grid) + "x" + std::to_string(grid) + " grid");
    }
    if (min_objects == 0 || min_objects > max_objects) {
        throw GenerationError("object count range must satisfy 1 <= min <= max");
    }
    if (max_objects > grid * grid) {
        throw GenerationError("cannot place " + std::to_string(max_objects) + " objects in " +
                              std::to_string(grid * grid) + " grid cells");
    }
    if (max_objects > kShapeNames.size() * kColorNames.size()) {
        throw GenerationError("more objects requested than distinct (shape, color) pairs");
    }
    if (min_size == 0 || min_size > max_size || max_size > canvas / grid) {
        throw GenerationError("object size range does not fit a " + std::to_string(canvas / grid) +
                              " px cell");
    }
}

Scene generate_scene(std::uint64_t seed, const GridConfig& grid) {
    grid.validate();
    Rng rng(seed);
    Scene scene;
    scene.image = RgbImage(grid.canvas, grid.canvas);
    for (auto& px : scene.image.pixels) {
        const int jitter = static_cast<int>(rng.below(2 * kBackgroundJitter + 1)) - kBackgroundJitter;
        px = static_cast<std::uint8_t>(kBackground + jitter);
    }

    const std::size_t count = grid.min_objects + rng.below(grid.max_objects - grid.min_objects + 1);
    std::vector<std::size_t> cells(grid.grid * grid.grid);
    std::iota(cells.begin(), cells.end(), 0);
    rng.shuffle(std::span(cells));
    std::vector<std::size_t> kinds(kShapeNames.size() * kColorNames.size());
    std::iota(kinds.begin(), kinds.end(), 0);
    rng.shuffle(std::span(kinds));

    const std::size_t cell_px = grid.canvas / grid.grid;
    for (std::size_t i = 0; i < count; ++i) {
        SceneObject obj;
        obj.shape = static_cast<ShapeKind>(kinds[i] / kColorNames.size());
        obj.color = static_cast<Color>(kinds[i] % kColorNames.size());
        const std::size_t size = grid.min_size + rng.below(grid.max_size - grid.min_size + 1);
        const std::size_t cx = cells[i] % grid.grid;
        const std::size_t cy = cells[i] / grid.grid;
        const std::size_t x = cx * cell_px + rng.below(cell_px - size + 1);
        const std::size_t y = cy * cell_px + rng.below(cell_px - size + 1);
        obj.box = {static_cast<double>(x), static_cast<double>(y), static_cast<double>(size),
                   static_cast<double>(size)};
        draw(scene.image, obj);
        scene.regions.push_back({obj.phrase(), obj.box});
        scene.objects.push_back(obj);
    }
    return scene;
}

std::vector<std::string> caption_scene(const Scene& scene, std::uint64_t seed) {
    if (scene.objects.empty()) {
        throw GenerationError("cannot caption a scene without objects");
    }
    Rng rng(splitmix64(seed ^ 0xCA7710ULL));
    const auto& objs = scene.objects;
    std::vector<std::string> captions;
    std::vector<std::string> pool;
    for (const auto& o : objs) {
        pool.push_back(o.phrase());
        pool.push_back(attribute_caption(o));
    }
    if (objs.size() >= 2) {
        std::vector<std::string> pairs;
        for (std::size_t i = 0; i < objs.size(); ++i) {
            for (std::size_t j = 0; j < objs.size(); ++j) {
                if (i != j) pairs.push_back(pair_caption(objs[i], objs[j]));
            }
        }
        const std::size_t first = rng.below(pairs.size());
        captions.push_back(pairs[first]);
        pairs.erase(pairs.begin() + static_cast<std::ptrdiff_t>(first));
        pool.insert(pool.end(), pairs.begin(), pairs.end());
    }
    rng.shuffle(std::span(pool));
    for (const auto& c : pool) {
        if (captions.size() == kCaptionsPerScene) break;
        captions.push_back(c);
    }
    const std::vector<std::string> distinct = captions;
    while (captions.size() < kCaptionsPerScene) {
        captions.push_back(distinct[rng.below(distinct.size())]);
    }
    return captions;
}

Dataset generate_dataset(std::size_t scene_count, std::uint64_t seed, const GridConfig& grid) {
    Dataset ds;
    ds.scenes.reserve(scene_count);
    std::vector<std::string> corpus;
    for (std::size_t i = 0; i < scene_count; ++i) {
        Scene s = generate_scene(hash_counters(seed, i, 0), grid);
        s.id = i;
        s.captions = caption_scene(s, hash_counters(seed, i, 1));
        corpus.insert(corpus.end(), s.captions.begin(), s.captions.end());
        ds.scenes.push_back(std::move(s));
    }
    ds.vocab = TokenVocab::from_corpus(corpus);
    return ds;
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir / "images", ec);
    if (ec) {
        throw IoError("cannot create " + (dir / "images").string() + ": " + ec.message());
    }
    std::ofstream manifest(dir / "manifest.jsonl", std::ios::binary);
    if (!manifest) {
        throw IoError("cannot write " + (dir / "manifest.jsonl").string());
    }
    for (std::size_t i = 0; i < dataset.scenes.size(); ++i) {
        const Scene& s = dataset.scenes[i];
        const std::string rel = image_name(i);
        write_ppm(dir / rel, s.image);
        json regions = json::array();
        for (const auto& r : s.regions) {
            regions.push_back({{"phrase", r.phrase}, {"bbox", box_json(r.box)}});
        }
        const json line = {{"id", s.id}, {"image", rel}, {"captions", s.captions}, {"regions", regions}};
        manifest << line.dump() << '\n';
    }
    if (!manifest) {
        throw IoError("failed writing " + (dir / "manifest.jsonl").string());
    }
    dataset.vocab.save(dir / "vocab.txt");
}

Dataset read_dataset(const std::filesystem::path& dir) {
    const auto manifest_path = dir / "manifest.jsonl";
    std::ifstream manifest(manifest_path, std::ios::binary);
    if (!manifest) {
        throw IoError("cannot open " + manifest_path.string());
    }
    Dataset ds;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(manifest, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::string where = manifest_path.string() + ":" + std::to_string(line_no) + ": ";
        Scene s;
        std::string rel;
        try {
            const json j = json::parse(line);
            s.id = j.at("id").get<std::size_t>();
            rel = j.at("image").get<std::string>();
            s.captions = j.at("captions").get<std::vector<std::string>>();
            for (const auto& r : j.at("regions")) {
                s.regions.push_back({r.at("phrase").get<std::string>(), parse_box(r.at("bbox"))});
            }
        } catch (const json::exception& e) {
            throw FormatError(where + e.what());
        } catch (const FormatError& e) {
            throw FormatError(where + e.what());
        }
        if (s.captions.empty()) {
            throw FormatError(where + "scene has no captions");
        }
        s.image = read_ppm(dir / rel);
        for (const auto& r : s.regions) {
            if (auto obj = object_from_phrase(r.phrase, r.box)) s.objects.push_back(*obj);
        }
        if (s.objects.size() != s.regions.size()) {
            s.objects.clear();
        }
        ds.scenes.push_back(std::move(s));
    }
    ds.vocab = TokenVocab::load(dir / "vocab.txt");
    return ds;
}

DatasetSplit split_indices(std::size_t count, double train_fraction, double val_fraction,
                           std::uint64_t seed) {
    if (train_fraction < 0.0 || val_fraction < 0.0 || train_fraction + val_fraction > 1.0) {
        throw ContractError("split fractions must be nonnegative and sum to at most 1");
    }
    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    rng.shuffle(std::span(order));
    const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(count)));
    const auto n_val = std::min(count - n_train,
                                static_cast<std::size_t>(std::floor(val_fraction * static_cast<double>(count))));
    DatasetSplit split;
    split.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    split.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                     order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    split.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
    return split;
}

Dataset subset(const Dataset& dataset, std::span<const std::size_t> indices) {
    Dataset out;
    out.vocab = dataset.vocab;
    for (std::size_t i : indices) {
        out.scenes.push_back(dataset.scenes.at(i));
    }
    return out;
}

std::vector<RegionQuery> region_queries(const Dataset& dataset) {
    std::vector<RegionQuery> out;
    for (std::size_t i = 0; i < dataset.scenes.size(); ++i) {
        const Scene& s = dataset.scenes[i];
        for (const auto& r : s.regions) {
            out.push_back({i, r.phrase, r.box, s.image.width, s.image.height});
        }
    }
    return out;
}

}  // namespace semvis
