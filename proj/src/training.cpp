#include "semvis/training.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include "semvis/image_io.hpp"
#include "semvis/objective.hpp"

namespace semvis {

double effective_lr(std::size_t epoch, const TrainSchedule& sched) {
    return std::ldexp(sched.lr0, -static_cast<int>(std::min(epoch, sched.halving_until_epoch)));
}

std::vector<ParamGroup> trainable_groups(std::size_t epoch, const TrainSchedule& sched) {
    if (epoch < sched.freeze_epochs) {
        return {ParamGroup::kTheta2, ParamGroup::kPhi, ParamGroup::kWordTable};
    }
    return {ParamGroup::kTheta0, ParamGroup::kTheta1, ParamGroup::kTheta2, ParamGroup::kPhi,
            ParamGroup::kWordTable};
}

std::vector<std::string> trainable_set(const Model& model, std::size_t epoch, const TrainSchedule& sched) {
    const auto groups = trainable_groups(epoch, sched);
    std::vector<std::string> names;
    for (const auto& p : model.parameters()) {
        if (std::find(groups.begin(), groups.end(), p.group) != groups.end()) {
            names.push_back(p.name);
        }
    }
    return names;
}

void adam_step(std::span<const NamedParam> params, AdamState& state, double lr) {
    const auto& c = state.config;
    for (const auto& p : params) {
        if (!p.tensor.has_grad()) {
            throw ContractError("adam_step: parameter '" + p.name + "' has no gradient");
        }
        const auto g = p.tensor.grad();
        auto& mom = state.moments[p.name];
        if (mom.m.empty()) {
            mom.m.assign(g.size(), 0.0);
            mom.v.assign(g.size(), 0.0);
        }
        if (mom.m.size() != g.size()) {
            throw DimensionError("adam_step: moment size mismatch for '" + p.name + "'");
        }
        ++mom.step;
        const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(mom.step));
        const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(mom.step));
        Tensor handle = p.tensor;
        auto data = handle.mutable_data();
        for (std::size_t i = 0; i < g.size(); ++i) {
            mom.m[i] = c.beta1 * mom.m[i] + (1.0 - c.beta1) * g[i];
            mom.v[i] = c.beta2 * mom.v[i] + (1.0 - c.beta2) * g[i] * g[i];
            const double m_hat = mom.m[i] / bc1;
            const double v_hat = mom.v[i] / bc2;
            data[i] -= lr * m_hat / (std::sqrt(v_hat) + c.epsilon);
        }
    }
}

nlohmann::json EpochResult::to_json() const {
    return {{"epoch", epoch}, {"loss", loss}, {"lr", lr}, {"trainable", trainable}};
}

namespace {

// Dropout streams: image path and text path draw from distinct layer ids.
constexpr std::uint64_t kImageDropoutLayer = 1;
constexpr std::uint64_t kTextDropoutLayer = 2;
constexpr std::uint64_t kSamplesPerStep = 1024;

}  // namespace

EpochResult train_epoch(Model& model, const Dataset& dataset, const RunConfig& cfg, TrainState& state) {
    const std::size_t n = dataset.scenes.size();
    if (n < 2) {
        throw ContractError("training needs at least two scenes, got " + std::to_string(n));
    }
    const TrainSchedule sched = cfg.schedule();
    const std::size_t epoch = state.epoch;
    const LossConfig loss_cfg = cfg.loss_at(epoch);
    const double lr = effective_lr(epoch, sched);

    const auto groups = trainable_groups(epoch, sched);
    std::vector<NamedParam> trainable;
    for (auto& p : model.parameters()) {
        const bool on = std::find(groups.begin(), groups.end(), p.group) != groups.end();
        p.tensor.set_requires_grad(on);
        p.tensor.zero_grad();
        if (on) trainable.push_back(p);
    }

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    state.rng.shuffle(std::span<std::size_t>(order));

    EpochResult result;
    result.epoch = epoch;
    result.lr = lr;
    for (const auto& p : trainable) result.trainable.push_back(p.name);

    double loss_sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t begin = 0; begin < n; begin += sched.batch_size, ++batch_index) {
        std::vector<std::size_t> ids(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                     order.begin() + static_cast<std::ptrdiff_t>(std::min(n, begin + sched.batch_size)));
        if (ids.size() == 1) {
            // A lone image has no negatives; pair it with a different one.
            std::size_t other = state.rng.below(n - 1);
            if (other >= ids[0]) ++other;
            ids.push_back(other);
        }

        Tape tape;
        Tensor loss;
        {
            TapeScope scope(tape);
            std::vector<Tensor> images, captions;
            for (std::size_t k = 0; k < ids.size(); ++k) {
                const Scene& scene = dataset.scenes[ids[k]];
                const std::uint64_t sample = state.step * kSamplesPerStep + k;
                Tensor pixels = image_to_tensor(scene.image);
                if (cfg.random_crop) pixels = random_crop_resize(pixels, state.rng);
                images.push_back(
                    model.encode_image(pixels, Mode::kTrain, {cfg.seed, kImageDropoutLayer, sample}).embedding);
                if (scene.captions.empty()) {
                    throw ContractError("scene " + std::to_string(scene.id) + " has no captions");
                }
                const std::string& caption = scene.captions[state.rng.below(scene.captions.size())];
                const auto tokens = tokenize(caption, dataset.vocab);
                captions.push_back(model.encode_text(tokens, Mode::kTrain, {cfg.seed, kTextDropoutLayer, sample}));
            }
            loss = batch_loss(stack(images), stack(captions), ids, loss_cfg);
        }
        const double value = loss.item();
        if (!std::isfinite(value)) {
            throw Error("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                        std::to_string(batch_index));
        }
        if (loss.requires_grad()) {
            tape.backward(loss);
            adam_step(trainable, state.adam, lr);
        }
        for (auto& p : trainable) p.tensor.zero_grad();
        loss_sum += value;
        ++state.step;
    }

    for (auto& p : model.parameters()) p.tensor.set_requires_grad(false);
    result.batches = batch_index;
    result.loss = loss_sum / static_cast<double>(batch_index);
    ++state.epoch;
    return result;
}

// ---------------------------------------------------------------------------
// Checkpoint

namespace {

constexpr char kMagic[4] = {'S', 'V', 'E', 'C'};

class Writer {
public:
    void u32(std::uint32_t x) { put(x, 4); }
    void u64(std::uint64_t x) { put(x, 8); }
    void f64(double x) { put(std::bit_cast<std::uint64_t>(x), 8); }
    void bytes(const std::string& s) { out_.append(s); }
    void name(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes(s);
    }
    void tensor(const std::string& n, const Shape& shape, std::span<const double> values) {
        name(n);
        u32(static_cast<std::uint32_t>(shape.size()));
        for (std::size_t d : shape) u64(d);
        for (double v : values) f64(v);
    }
    const std::string& str() const { return out_; }

private:
    void put(std::uint64_t x, int n) {
        for (int i = 0; i < n; ++i) out_.push_back(static_cast<char>((x >> (8 * i)) & 0xFF));
    }
    std::string out_;
};

class Reader {
public:
    Reader(std::string data, std::string origin) : data_(std::move(data)), origin_(std::move(origin)) {}

    std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
    std::uint64_t u64() { return get(8); }
    double f64() { return std::bit_cast<double>(get(8)); }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    std::string name() { return bytes(u32()); }
    bool done() const { return pos_ == data_.size(); }

    struct Entry {
        std::string name;
        Shape shape;
        std::vector<double> values;
    };
    Entry tensor() {
        Entry e;
        e.name = name();
        const std::uint32_t rank = u32();
        if (rank > 8) fail("implausible tensor rank");
        std::size_t count = 1;
        for (std::uint32_t i = 0; i < rank; ++i) {
            const std::uint64_t d = u64();
            if (d > data_.size()) fail("implausible tensor dimension");
            e.shape.push_back(static_cast<std::size_t>(d));
            count *= static_cast<std::size_t>(d);
        }
        need(count * 8);
        e.values.resize(count);
        for (double& v : e.values) v = f64();
        return e;
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw FormatError(origin_ + ": " + what + " at byte " + std::to_string(pos_));
    }

private:
    void need(std::size_t n) const {
        if (n > data_.size() - pos_) fail("truncated checkpoint");
    }
    std::uint64_t get(int n) {
        need(static_cast<std::size_t>(n));
        std::uint64_t x = 0;
        for (int i = 0; i < n; ++i) {
            x |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        }
        pos_ += static_cast<std::size_t>(n);
        return x;
    }

    std::string data_;
    std::string origin_;
    std::size_t pos_ = 0;
};

std::string join_tokens(const TokenVocab& vocab) {
    std::string s;
    for (const auto& t : vocab.tokens()) {
        s += t;
        s += '\n';
    }
    return s;
}

TokenVocab split_tokens(const std::string& blob) {
    std::vector<std::string> tokens;
    std::istringstream in(blob);
    std::string line;
    while (std::getline(in, line)) tokens.push_back(line);
    return TokenVocab(tokens);
}

const std::string kAdamM = "adam.m/";
const std::string kAdamV = "adam.v/";
const std::string kAdamStep = "adam.step/";

bool starts_with(const std::string& s, const std::string& prefix) { return s.rfind(prefix, 0) == 0; }

}  // namespace

TrainingSession::TrainingSession(const RunConfig& cfg, const TokenVocab& vocab)
    : cfg_(cfg), vocab_(vocab), model_(ModelConfig::from_run(cfg), vocab.size(), cfg.seed) {
    cfg_.validate();
    state_.rng = Rng(hash_counters(cfg.seed, 0x7261696EULL));
}

EpochResult TrainingSession::run_epoch(const Dataset& dataset) {
    if (!(dataset.vocab == vocab_)) {
        throw ContractError("dataset vocabulary differs from the model's");
    }
    return train_epoch(model_, dataset, cfg_, state_);
}

void TrainingSession::save(const std::filesystem::path& path) const {
    Writer w;
    w.bytes(std::string(kMagic, 4));
    w.u32(kCheckpointVersion);

    const auto params = model_.parameters();
    w.u32(static_cast<std::uint32_t>(params.size()));
    for (const auto& p : params) w.tensor(p.name, p.tensor.shape(), p.tensor.data());

    w.u32(static_cast<std::uint32_t>(state_.adam.moments.size() * 3 + 2));
    for (const auto& [name, mom] : state_.adam.moments) {
        w.tensor(kAdamM + name, {mom.m.size()}, mom.m);
        w.tensor(kAdamV + name, {mom.v.size()}, mom.v);
        const double step = static_cast<double>(mom.step);
        w.tensor(kAdamStep + name, {}, std::span<const double>(&step, 1));
    }
    const double epoch = static_cast<double>(state_.epoch);
    const double step = static_cast<double>(state_.step);
    w.tensor("state.epoch", {}, std::span<const double>(&epoch, 1));
    w.tensor("state.step", {}, std::span<const double>(&step, 1));

    const std::vector<std::pair<std::string, std::string>> blobs{
        {"rng", state_.rng.state()}, {"config", cfg_.to_json().dump()}, {"vocab", join_tokens(vocab_)}};
    w.u32(static_cast<std::uint32_t>(blobs.size()));
    for (const auto& [name, data] : blobs) {
        w.name(name);
        w.u64(data.size());
        w.bytes(data);
    }

    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write checkpoint " + path.string());
    }
    out.write(w.str().data(), static_cast<std::streamsize>(w.str().size()));
    if (!out) {
        throw IoError("failed writing checkpoint " + path.string());
    }
}

TrainingSession TrainingSession::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open checkpoint " + path.string());
    }
    Reader r(std::string(std::istreambuf_iterator<char>(in), {}), path.string());
    if (r.bytes(4) != std::string(kMagic, 4)) r.fail("bad magic, not a checkpoint");
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) {
        r.fail("unsupported checkpoint version " + std::to_string(version));
    }

    std::vector<Reader::Entry> param_entries(r.u32());
    for (auto& e : param_entries) e = r.tensor();
    std::vector<Reader::Entry> state_entries(r.u32());
    for (auto& e : state_entries) e = r.tensor();

    std::map<std::string, std::string> blobs;
    const std::uint32_t blob_count = r.u32();
    for (std::uint32_t i = 0; i < blob_count; ++i) {
        std::string name = r.name();
        const std::uint64_t length = r.u64();
        blobs[name] = r.bytes(static_cast<std::size_t>(length));
    }
    if (!r.done()) r.fail("trailing bytes");
    for (const char* required : {"rng", "config", "vocab"}) {
        if (!blobs.contains(required)) r.fail(std::string("missing section '") + required + "'");
    }
    for (const auto& [name, _] : blobs) {
        if (name != "rng" && name != "config" && name != "vocab") r.fail("unknown section '" + name + "'");
    }

    RunConfig cfg;
    try {
        cfg = RunConfig::from_json(nlohmann::json::parse(blobs["config"]));
    } catch (const nlohmann::json::exception& e) {
        r.fail(std::string("bad config section: ") + e.what());
    }
    TrainingSession session(cfg, split_tokens(blobs["vocab"]));

    auto params = session.model_.parameters();
    std::set<std::string> seen;
    for (const auto& e : param_entries) {
        auto it = std::find_if(params.begin(), params.end(), [&](const NamedParam& p) { return p.name == e.name; });
        if (it == params.end()) r.fail("unknown tensor name '" + e.name + "'");
        if (it->tensor.shape() != e.shape) r.fail("shape mismatch for '" + e.name + "'");
        if (!seen.insert(e.name).second) r.fail("duplicate tensor '" + e.name + "'");
        std::copy(e.values.begin(), e.values.end(), it->tensor.mutable_data().begin());
    }
    if (seen.size() != params.size()) r.fail("checkpoint is missing parameters");

    auto scalar_of = [&](const Reader::Entry& e) {
        if (!e.shape.empty()) r.fail("expected scalar for '" + e.name + "'");
        return e.values[0];
    };
    auto param_size = [&](const std::string& name) -> std::size_t {
        for (const auto& p : params) {
            if (p.name == name) return p.tensor.numel();
        }
        r.fail("unknown tensor name '" + name + "'");
    };
    auto& st = session.state_;
    for (const auto& e : state_entries) {
        if (starts_with(e.name, kAdamM) || starts_with(e.name, kAdamV)) {
            const std::string pname = e.name.substr(kAdamM.size());
            if (e.shape != Shape{param_size(pname)}) r.fail("shape mismatch for '" + e.name + "'");
            auto& mom = st.adam.moments[pname];
            (starts_with(e.name, kAdamM) ? mom.m : mom.v) = e.values;
        } else if (starts_with(e.name, kAdamStep)) {
            const std::string pname = e.name.substr(kAdamStep.size());
            param_size(pname);
            st.adam.moments[pname].step = static_cast<std::uint64_t>(scalar_of(e));
        } else if (e.name == "state.epoch") {
            st.epoch = static_cast<std::size_t>(scalar_of(e));
        } else if (e.name == "state.step") {
            st.step = static_cast<std::uint64_t>(scalar_of(e));
        } else {
            r.fail("unknown tensor name '" + e.name + "'");
        }
    }
    for (const auto& [name, mom] : st.adam.moments) {
        if (mom.m.size() != mom.v.size() || mom.m.empty()) r.fail("incomplete optimizer state for '" + name + "'");
    }
    try {
        st.rng.restore(blobs["rng"]);
    } catch (const std::exception& e) {
        r.fail(std::string("bad rng section: ") + e.what());
    }
    return session;
}

}  // namespace semvis
