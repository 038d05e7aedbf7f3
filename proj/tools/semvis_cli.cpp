#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "semvis/config.hpp"
#include "semvis/pipeline.hpp"
#include "semvis/synth.hpp"
#include "semvis/training.hpp"

namespace {

using nlohmann::json;
using namespace semvis;

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string flag_name(const std::string& key) {
    std::string f = key;
    for (char& c : f) {
        if (c == '_') c = '-';
    }
    return "--" + f;
}

// One optional string flag per RunConfig key, converted to JSON on use.
struct ConfigFlags {
    std::map<std::string, std::string> values;

    void attach(CLI::App* cmd) {
        for (const auto& key : RunConfig::keys()) {
            cmd->add_option(flag_name(key), values[key], "run configuration key '" + key + "'");
        }
    }

    json overrides(const CLI::App* cmd) const {
        json j = json::object();
        for (const auto& key : RunConfig::keys()) {
            if (cmd->count(flag_name(key)) == 0) continue;
            std::string text = values.at(key);
            if (text.find(',') != std::string::npos && text.front() != '[') text = "[" + text + "]";
            json v = json::parse(text, nullptr, false);
            j[key] = v.is_discarded() ? json(values.at(key)) : v;
        }
        return j;
    }
};

RunConfig resolve_config(const std::string& file, const json& overrides) {
    try {
        const RunConfig base = file.empty() ? RunConfig{} : RunConfig::load(file);
        return RunConfig::from_json(overrides, base);
    } catch (const ContractError& e) {
        throw UsageError(e.what());
    }
}

Dataset load_data(const std::string& dir) {
    if (!std::filesystem::is_directory(dir)) {
        throw IoError("data directory '" + dir + "' does not exist");
    }
    return read_dataset(dir);
}

void write_json_file(const std::filesystem::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

std::pair<std::size_t, std::size_t> parse_object_range(const std::string& text) {
    const auto dots = text.find("..");
    try {
        if (dots == std::string::npos) {
            const std::size_t n = std::stoul(text);
            return {n, n};
        }
        return {std::stoul(text.substr(0, dots)), std::stoul(text.substr(dots + 2))};
    } catch (const std::logic_error&) {
        throw UsageError("--objects expects N or MIN..MAX, got '" + text + "'");
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Joint image/sentence embedding with text-driven localization"};
    app.require_subcommand(1);

    // generate-data
    auto* gen = app.add_subcommand("generate-data", "Write a synthetic shapes-and-captions dataset");
    std::string gen_out;
    std::size_t gen_scenes = 0;
    std::uint64_t gen_seed = 1;
    std::string gen_objects = "2..3";
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--scenes", gen_scenes, "number of scenes")->required();
    gen->add_option("--seed", gen_seed, "generator seed")->required();
    gen->add_option("--objects", gen_objects, "objects per scene, N or MIN..MAX")->capture_default_str();

    // train
    auto* train = app.add_subcommand("train", "Train a model on a dataset");
    train->footer("Run configuration keys and defaults:\n" + RunConfig::describe());
    std::string train_data, train_out, train_config, train_resume, train_val, train_log;
    bool select_best = false;
    ConfigFlags train_flags;
    train->add_option("--data", train_data, "dataset directory")->required();
    train->add_option("--out", train_out, "checkpoint path")->required();
    train->add_option("--config", train_config, "JSON run configuration");
    train->add_option("--resume", train_resume, "continue from this checkpoint");
    train->add_option("--log", train_log, "JSON-lines log path (default: <out>.log.jsonl)");
    train->add_option("--val-data", train_val, "validation dataset, reported per epoch");
    train->add_flag("--select-best", select_best, "keep the epoch with the best validation caption R@1");
    train_flags.attach(train);

    // eval-retrieval
    auto* er = app.add_subcommand("eval-retrieval", "Cross-modal retrieval report as JSON");
    std::string er_ckpt, er_data;
    er->add_option("--ckpt", er_ckpt, "checkpoint")->required();
    er->add_option("--data", er_data, "dataset directory")->required();

    // eval-pointing
    auto* ep = app.add_subcommand("eval-pointing", "Pointing-game report as JSON");
    std::string ep_ckpt, ep_data, ep_selection;
    std::size_t ep_k = 0;
    ep->add_option("--ckpt", ep_ckpt, "checkpoint")->required();
    ep->add_option("--data", ep_data, "dataset directory")->required();
    ep->add_option("--k", ep_k, "number of embedding dimensions used by the heatmap");
    ep->add_option("--selection", ep_selection, "top-k selection: signed or absolute");

    // localize
    auto* loc = app.add_subcommand("localize", "Heatmap and point for a phrase over one image");
    std::string loc_ckpt, loc_image, loc_text, loc_out, loc_selection;
    std::size_t loc_k = 0;
    loc->add_option("--ckpt", loc_ckpt, "checkpoint")->required();
    loc->add_option("--image", loc_image, "binary PPM image")->required();
    loc->add_option("--text", loc_text, "phrase to localize")->required();
    loc->add_option("--out", loc_out, "output prefix")->required();
    loc->add_option("--k", loc_k, "number of embedding dimensions used by the heatmap");
    loc->add_option("--selection", loc_selection, "top-k selection: signed or absolute");

    // dry-run
    auto* dry = app.add_subcommand("dry-run", "Print parameter and activation shapes without training");
    dry->footer("Run configuration keys and defaults:\n" + RunConfig::describe());
    std::string dry_config;
    bool dry_large = false;
    std::size_t dry_vocab = 10000, dry_image = 0;
    ConfigFlags dry_flags;
    dry->add_option("--config", dry_config, "JSON run configuration");
    dry->add_flag("--large-scale", dry_large, "start from the large configuration");
    dry->add_option("--vocab", dry_vocab, "vocabulary size")->capture_default_str();
    dry->add_option("--image-size", dry_image, "square input size (default: 64, or 224 at large scale)");
    dry_flags.attach(dry);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*gen) {
            GridConfig grid;
            std::tie(grid.min_objects, grid.max_objects) = parse_object_range(gen_objects);
            try {
                grid.validate();
            } catch (const GenerationError& e) {
                throw UsageError(e.what());
            }
            write_dataset(generate_dataset(gen_scenes, gen_seed, grid), gen_out);
            std::cerr << "wrote " << gen_scenes << " scenes to " << gen_out << '\n';
            return 0;
        }

        if (*train) {
            const Dataset data = load_data(train_data);
            std::optional<Dataset> val;
            if (!train_val.empty()) val = load_data(train_val);
            if (select_best && !val) throw UsageError("--select-best needs --val-data");

            std::optional<TrainingSession> session;
            const json overrides = train_flags.overrides(train);
            if (!train_resume.empty()) {
                if (!train_config.empty() || overrides.size() > (overrides.contains("epochs") ? 1u : 0u)) {
                    throw UsageError("--resume takes its configuration from the checkpoint; only --epochs may be given");
                }
                session.emplace(TrainingSession::load(train_resume));
                if (overrides.contains("epochs")) session->set_total_epochs(overrides["epochs"].get<std::size_t>());
            } else {
                session.emplace(resolve_config(train_config, overrides), data.vocab);
            }
            if (!(session->vocab() == data.vocab)) {
                throw ContractError("dataset vocabulary differs from the checkpoint's");
            }

            const std::string log_path = train_log.empty() ? train_out + ".log.jsonl" : train_log;
            std::ofstream log(log_path, train_resume.empty() ? std::ios::trunc : std::ios::app);
            if (!log) throw IoError("cannot write log " + log_path);

            double best = -1.0;
            bool saved = false;
            while (session->state().epoch < session->config().epochs) {
                const EpochResult r = session->run_epoch(data);
                json line = r.to_json();
                if (val) {
                    Dataset v = *val;
                    v.vocab = session->vocab();
                    const double r1 = evaluate_retrieval(session->model(), v).caption.recall(1);
                    line["val_caption_r1"] = r1;
                    if (select_best && r1 > best) {
                        best = r1;
                        session->save(train_out);
                        saved = true;
                    }
                }
                log << line.dump() << '\n' << std::flush;
                std::cerr << line.dump() << '\n';
            }
            if (!select_best || !saved) session->save(train_out);
            return 0;
        }

        if (*er) {
            const TrainingSession session = TrainingSession::load(er_ckpt);
            Dataset data = load_data(er_data);
            data.vocab = session.vocab();
            const RetrievalReports reports = evaluate_retrieval(session.model(), data);
            std::cout << json::array({to_json(reports.caption), to_json(reports.image)}).dump(2) << '\n';
            return 0;
        }

        if (*ep) {
            const TrainingSession session = TrainingSession::load(ep_ckpt);
            Dataset data = load_data(ep_data);
            data.vocab = session.vocab();
            LocalizationConfig cfg = session.config().localization();
            if (ep->count("--k") > 0) cfg.k = ep_k;
            if (!ep_selection.empty()) cfg.selection = parse_selection(ep_selection);
            const PointingReport report = evaluate_pointing(session.model(), data, cfg);
            json j = to_json(report);
            j["k"] = cfg.k;
            j["selection"] = to_string(cfg.selection);
            std::cout << j.dump(2) << '\n';
            return 0;
        }

        if (*loc) {
            if (split_words(loc_text).empty()) throw UsageError("--text holds no words");
            const TrainingSession session = TrainingSession::load(loc_ckpt);
            LocalizationConfig cfg = session.config().localization();
            if (loc->count("--k") > 0) cfg.k = loc_k;
            if (!loc_selection.empty()) cfg.selection = parse_selection(loc_selection);
            const RgbImage image = read_ppm(loc_image);
            const Localization result = localize(session.model(), session.vocab(), image, loc_text, cfg);
            if (result.all_unknown) {
                std::cerr << "warning: no word of '" << loc_text
                          << "' is in the vocabulary; localizing the unknown token\n";
            }
            write_heatmap(result.heatmap, image, loc_out);
            const json j{{"x", result.point.x}, {"y", result.point.y}, {"heat_max", result.heat_max}};
            write_json_file(loc_out + ".json", j);
            std::cout << j.dump() << '\n';
            return 0;
        }

        if (*dry) {
            RunConfig base = dry_large ? large_scale_config() : RunConfig{};
            if (!dry_config.empty()) {
                try {
                    base = RunConfig::load(dry_config);
                } catch (const ContractError& e) {
                    throw UsageError(e.what());
                }
            }
            RunConfig cfg;
            try {
                cfg = RunConfig::from_json(dry_flags.overrides(dry), base);
            } catch (const ContractError& e) {
                throw UsageError(e.what());
            }
            const std::size_t size = dry_image != 0 ? dry_image : (dry_large ? 224 : 64);
            json report = dry_run(cfg, dry_vocab, size);
            report["config"] = cfg.to_json();
            std::cout << report.dump(2) << '\n';
            return 0;
        }
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitUsage;
}
