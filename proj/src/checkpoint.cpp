#include "draftlab/checkpoint.hpp"

#include "draftlab/error.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace draft::checkpoint {

namespace {

constexpr char kMagic[4] = {'D', 'R', 'F', 'T'};
constexpr int kMaxRank = 8;
constexpr std::int64_t kMaxNumel = std::int64_t{1} << 40;
constexpr std::uint32_t kMaxRngWords = 1024;

void put_u8(std::string& out, std::uint8_t v) {
    out.push_back(static_cast<char>(v));
}

void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i)
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i)
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, real v) {
    put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

void put_f64(std::string& out, double v) {
    put_u64(out, std::bit_cast<std::uint64_t>(v));
}

void put_tensor_record(std::string& out, const std::string& name,
                       std::uint8_t tag, const Tensor& t) {
    check(name.size() <= 0xffff, ErrorCode::kState,
          "parameter name too long to serialize: " + name);
    put_u16(out, static_cast<std::uint16_t>(name.size()));
    out.append(name);
    put_u8(out, tag);
    put_u8(out, static_cast<std::uint8_t>(t.shape.size()));
    for (int dim : t.shape) put_u32(out, static_cast<std::uint32_t>(dim));
    for (real v : t.data) put_f32(out, v);
}

struct Cursor {
    const std::string& path;
    const std::string& bytes;
    std::size_t pos = 0;

    void need(std::size_t n, const std::string& what) {
        check(n <= bytes.size() - pos, ErrorCode::kCorruptFile,
              path + ": file ends early inside " + what);
    }

    std::uint8_t take_u8(const std::string& what) {
        need(1, what);
        return static_cast<std::uint8_t>(bytes[pos++]);
    }

    std::uint16_t take_u16(const std::string& what) {
        need(2, what);
        std::uint16_t v = 0;
        for (int i = 0; i < 2; ++i)
            v |= std::uint16_t(static_cast<unsigned char>(bytes[pos++]))
                 << (8 * i);
        return v;
    }

    std::uint32_t take_u32(const std::string& what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= std::uint32_t(static_cast<unsigned char>(bytes[pos++]))
                 << (8 * i);
        return v;
    }

    std::uint64_t take_u64(const std::string& what) {
        need(8, what);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= std::uint64_t(static_cast<unsigned char>(bytes[pos++]))
                 << (8 * i);
        return v;
    }

    real take_f32(const std::string& what) {
        return static_cast<real>(std::bit_cast<float>(take_u32(what)));
    }

    double take_f64(const std::string& what) {
        return std::bit_cast<double>(take_u64(what));
    }

    std::string take_name(const std::string& what) {
        std::uint16_t len = take_u16(what);
        need(len, what);
        std::string name = bytes.substr(pos, len);
        pos += len;
        return name;
    }
};

struct TensorRecord {
    std::string name;
    std::uint8_t tag = 0;
    std::vector<int> shape;
    std::vector<real> data;
};

TensorRecord read_tensor_record(Cursor& cur, const std::string& what) {
    TensorRecord rec;
    rec.name = cur.take_name(what);
    const std::string ctx = what + " " + rec.name;
    rec.tag = cur.take_u8(ctx);
    check(rec.tag < kGroupCount, ErrorCode::kCheckpointFormat,
          cur.path + ": " + ctx + " carries unknown group tag " +
              std::to_string(int(rec.tag)));
    int rank = cur.take_u8(ctx);
    check(rank <= kMaxRank, ErrorCode::kCheckpointFormat,
          cur.path + ": " + ctx + " claims rank " + std::to_string(rank));
    std::int64_t numel = 1;
    for (int i = 0; i < rank; ++i) {
        std::uint32_t dim = cur.take_u32(ctx);
        check(dim >= 1 && numel * dim <= kMaxNumel,
              ErrorCode::kCheckpointFormat,
              cur.path + ": " + ctx + " has implausible dimensions");
        rec.shape.push_back(static_cast<int>(dim));
        numel *= dim;
    }
    cur.need(static_cast<std::size_t>(numel) * 4, ctx);
    rec.data.resize(static_cast<std::size_t>(numel));
    for (auto& v : rec.data) v = cur.take_f32(ctx);
    return rec;
}

std::string shape_string(const std::vector<int>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ", ";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamStore& store,
                     const TrainState& state, const AdamState* optimizer) {
    std::string out;
    std::size_t capacity = 64;
    for (const auto& [name, entry] : store.entries())
        capacity += name.size() + 16 +
                    static_cast<std::size_t>(entry.tensor->numel()) * 4;
    if (optimizer != nullptr)
        for (const auto& [name, moments] : optimizer->moments())
            capacity += 2 * (name.size() + 18) + 8 * moments.m.size();
    out.reserve(capacity);

    out.append(kMagic, 4);
    put_u32(out, kVersion);
    put_u64(out, state.step);
    put_u32(out, static_cast<std::uint32_t>(store.entries().size()));
    for (const auto& [name, entry] : store.entries())
        put_tensor_record(out, name, static_cast<std::uint8_t>(entry.group),
                          *entry.tensor);
    for (std::uint32_t c : store.stage_counts()) put_u32(out, c);
    put_u32(out, static_cast<std::uint32_t>(state.rng_words.size()));
    for (std::uint64_t w : state.rng_words) put_u64(out, w);
    put_u8(out, optimizer != nullptr ? 1 : 0);
    if (optimizer != nullptr) {
        put_u64(out, static_cast<std::uint64_t>(optimizer->t()));
        put_f64(out, optimizer->config().beta1);
        put_f64(out, optimizer->config().beta2);
        put_f64(out, optimizer->config().epsilon);
        put_u32(out, static_cast<std::uint32_t>(optimizer->moments().size()));
        for (const auto& [name, moments] : optimizer->moments()) {
            Tensor m, v;
            m.shape = {static_cast<int>(moments.m.size())};
            m.data = moments.m;
            v.shape = {static_cast<int>(moments.v.size())};
            v.data = moments.v;
            put_tensor_record(out, name + "#m", 0, m);
            put_tensor_record(out, name + "#v", 0, v);
        }
    }

    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    check(static_cast<bool>(file), ErrorCode::kUsage,
          "cannot open " + path + " for writing");
    file.write(out.data(), static_cast<std::streamsize>(out.size()));
    file.flush();
    check(static_cast<bool>(file), ErrorCode::kUsage,
          "write to " + path + " failed");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    check(static_cast<bool>(file), ErrorCode::kCorruptFile,
          "cannot open " + path);
    std::string bytes{std::istreambuf_iterator<char>(file),
                      std::istreambuf_iterator<char>()};
    Cursor cur{path, bytes};

    cur.need(4, "the magic bytes");
    check(std::memcmp(bytes.data(), kMagic, 4) == 0,
          ErrorCode::kCheckpointFormat,
          path + ": bad magic bytes, not a checkpoint file");
    cur.pos = 4;

    Checkpoint ckpt;
    ckpt.version = cur.take_u32("the version field");
    check(ckpt.version == kVersion, ErrorCode::kCheckpointFormat,
          path + ": checkpoint version " + std::to_string(ckpt.version) +
              ", this build reads version " + std::to_string(kVersion));
    ckpt.step = cur.take_u64("the step field");

    std::uint32_t n_tensors = cur.take_u32("the tensor count");
    for (std::uint32_t i = 0; i < n_tensors; ++i) {
        TensorRecord rec = read_tensor_record(cur, "tensor record");
        check(!ckpt.store.has(rec.name), ErrorCode::kCheckpointFormat,
              path + ": duplicate tensor name " + rec.name);
        auto t = ckpt.store.create(rec.name, static_cast<ParamGroup>(rec.tag),
                                   rec.shape);
        t->data = std::move(rec.data);
    }

    std::array<std::uint32_t, kGroupCount> counters{};
    for (auto& c : counters) c = cur.take_u32("the update counter table");
    ckpt.store.set_stage_counts(counters);

    std::uint32_t n_words = cur.take_u32("the generator word count");
    check(n_words <= kMaxRngWords, ErrorCode::kCheckpointFormat,
          path + ": implausible generator state of " +
              std::to_string(n_words) + " words");
    ckpt.rng_words.reserve(n_words);
    for (std::uint32_t i = 0; i < n_words; ++i)
        ckpt.rng_words.push_back(cur.take_u64("the generator state"));

    std::uint8_t flag = cur.take_u8("the optimizer flag");
    check(flag <= 1, ErrorCode::kCheckpointFormat,
          path + ": optimizer flag must be 0 or 1, got " +
              std::to_string(int(flag)));
    ckpt.has_optimizer = flag == 1;
    if (ckpt.has_optimizer) {
        ckpt.optimizer_t =
            static_cast<std::int64_t>(cur.take_u64("the optimizer header"));
        ckpt.optimizer_config.beta1 = cur.take_f64("the optimizer header");
        ckpt.optimizer_config.beta2 = cur.take_f64("the optimizer header");
        ckpt.optimizer_config.epsilon = cur.take_f64("the optimizer header");
        std::uint32_t n_slots = cur.take_u32("the optimizer slot count");
        for (std::uint32_t i = 0; i < n_slots; ++i) {
            TensorRecord m = read_tensor_record(cur, "moment record");
            TensorRecord v = read_tensor_record(cur, "moment record");
            check(m.name.size() > 2 &&
                      m.name.compare(m.name.size() - 2, 2, "#m") == 0,
                  ErrorCode::kCheckpointFormat,
                  path + ": expected a first-moment record, got " + m.name);
            std::string base = m.name.substr(0, m.name.size() - 2);
            check(v.name == base + "#v", ErrorCode::kCheckpointFormat,
                  path + ": moment records for " + base + " are not paired");
            check(m.data.size() == v.data.size(),
                  ErrorCode::kCheckpointFormat,
                  path + ": moment buffers for " + base + " differ in size");
            check(!ckpt.optimizer_slots.count(base),
                  ErrorCode::kCheckpointFormat,
                  path + ": duplicate optimizer slot " + base);
            ckpt.optimizer_slots[base] = {std::move(m.data),
                                          std::move(v.data)};
        }
    }

    check(cur.pos == bytes.size(), ErrorCode::kCorruptFile,
          path + ": " + std::to_string(bytes.size() - cur.pos) +
              " trailing bytes after the last field");
    return ckpt;
}

namespace {

bool group_selected(const std::set<ParamGroup>* groups, ParamGroup g) {
    return groups == nullptr || groups->count(g) > 0;
}

void restore_selected(ParamStore& store, const Checkpoint& ckpt,
                      const std::set<ParamGroup>* groups) {
    std::vector<std::string> missing;
    for (const auto& [name, entry] : store.entries()) {
        if (!group_selected(groups, entry.group)) continue;
        if (!ckpt.store.has(name)) {
            missing.push_back(name);
            continue;
        }
        const ParamEntry& src = ckpt.store.entry(name);
        check(src.tensor->shape == entry.tensor->shape,
              ErrorCode::kCheckpointContent,
              "tensor " + name + " has shape " +
                  shape_string(src.tensor->shape) +
                  " in the checkpoint but the model expects " +
                  shape_string(entry.tensor->shape));
        check(src.group == entry.group, ErrorCode::kCheckpointContent,
              "tensor " + name + " is tagged " + group_name(src.group) +
                  " in the checkpoint but the model files it under " +
                  group_name(entry.group));
    }
    if (!missing.empty()) {
        std::string list;
        for (std::size_t i = 0; i < missing.size(); ++i) {
            if (i) list += ", ";
            list += missing[i];
        }
        fail(ErrorCode::kCheckpointContent,
             "checkpoint lacks " + std::to_string(missing.size()) +
                 " tensor(s) the model needs: " + list);
    }
    for (const auto& [name, entry] : store.entries())
        if (group_selected(groups, entry.group))
            entry.tensor->data = ckpt.store.get(name)->data;
    store.set_stage_counts(ckpt.store.stage_counts());
}

}  // namespace

void restore_into(ParamStore& store, const Checkpoint& ckpt) {
    restore_selected(store, ckpt, nullptr);
}

void restore_groups(ParamStore& store, const Checkpoint& ckpt,
                    const std::set<ParamGroup>& groups) {
    restore_selected(store, ckpt, &groups);
}

AdamState restore_optimizer(const Checkpoint& ckpt) {
    check(ckpt.has_optimizer, ErrorCode::kState,
          "checkpoint carries no optimizer block");
    AdamState state(ckpt.optimizer_config);
    state.restore(ckpt.optimizer_t, ckpt.optimizer_slots);
    return state;
}

void save_codebook(const std::string& path, const kmeans::Codebook& book) {
    check(book.centroids != nullptr, ErrorCode::kState,
          "codebook has no centroids to save");
    ParamStore store;
    auto centroids = store.create("codebook.centroids", ParamGroup::kBackbone,
                                  book.centroids->shape);
    centroids->data = book.centroids->data;
    auto inertia = store.create("codebook.inertia", ParamGroup::kBackbone,
                                {1});
    inertia->data[0] = static_cast<real>(book.inertia);
    TrainState state;
    state.step = static_cast<std::uint64_t>(book.iterations);
    save_checkpoint(path, store, state);
}

kmeans::Codebook load_codebook(const std::string& path) {
    Checkpoint ckpt = load_checkpoint(path);
    check(ckpt.store.has("codebook.centroids") &&
              ckpt.store.has("codebook.inertia"),
          ErrorCode::kCheckpointContent,
          path + ": not a codebook archive (centroids or inertia missing)");
    auto centroids = ckpt.store.get("codebook.centroids");
    check(centroids->shape.size() == 2, ErrorCode::kCheckpointContent,
          path + ": codebook centroids must be a rank-2 tensor");
    kmeans::Codebook book;
    book.centroids = make_tensor(centroids->shape, centroids->data);
    book.k = centroids->rows();
    book.iterations = static_cast<int>(ckpt.step);
    book.inertia =
        static_cast<double>(ckpt.store.get("codebook.inertia")->data[0]);
    return book;
}

}  // namespace draft::checkpoint
