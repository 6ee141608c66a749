#include "draftlab/param_store.hpp"

namespace draft {

const char* group_name(ParamGroup group) {
    switch (group) {
        case ParamGroup::kBackbone: return "Backbone";
        case ParamGroup::kSslHead: return "SslHead";
        case ParamGroup::kAdapter: return "Adapter";
        case ParamGroup::kAsrHead: return "AsrHead";
    }
    return "?";
}

std::optional<ParamGroup> group_from_name(const std::string& name) {
    for (int g = 0; g < kGroupCount; ++g) {
        auto group = static_cast<ParamGroup>(g);
        if (name == group_name(group)) return group;
    }
    return std::nullopt;
}

TensorPtr ParamStore::create(const std::string& name, ParamGroup group,
                             std::vector<int> shape) {
    check(!entries_.count(name), ErrorCode::kState,
          "parameter '" + name + "' already exists");
    auto tensor = make_tensor(std::move(shape), /*requires_grad=*/true);
    entries_[name] = ParamEntry{tensor, group, true};
    return tensor;
}

TensorPtr ParamStore::create_randn(const std::string& name, ParamGroup group,
                                   std::vector<int> shape, Rng& rng,
                                   double stddev) {
    auto tensor = create(name, group, std::move(shape));
    for (auto& v : tensor->data) v = static_cast<real>(stddev * rng.normal());
    return tensor;
}

bool ParamStore::has(const std::string& name) const {
    return entries_.count(name) != 0;
}

TensorPtr ParamStore::get(const std::string& name) const {
    return entry(name).tensor;
}

const ParamEntry& ParamStore::entry(const std::string& name) const {
    auto it = entries_.find(name);
    check(it != entries_.end(), ErrorCode::kState,
          "no parameter named '" + name + "'");
    return it->second;
}

void ParamStore::remove(const std::string& name) {
    check(entries_.erase(name) == 1, ErrorCode::kState,
          "cannot remove unknown parameter '" + name + "'");
}

std::vector<std::string> ParamStore::names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& [name, unused] : entries_) out.push_back(name);
    return out;
}

std::vector<std::string> ParamStore::names(ParamGroup group) const {
    std::vector<std::string> out;
    for (const auto& [name, entry] : entries_)
        if (entry.group == group) out.push_back(name);
    return out;
}

void ParamStore::set_trainable_groups(const std::set<ParamGroup>& groups) {
    for (auto& [name, entry] : entries_) {
        entry.trainable = groups.count(entry.group) != 0;
        entry.tensor->requires_grad = entry.trainable;
        if (!entry.trainable) entry.tensor->grad.clear();
    }
}

bool ParamStore::trainable(const std::string& name) const {
    return entry(name).trainable;
}

std::int64_t ParamStore::count_params() const {
    std::int64_t n = 0;
    for (const auto& [name, entry] : entries_) n += entry.tensor->numel();
    return n;
}

std::int64_t ParamStore::count_params(ParamGroup group) const {
    std::int64_t n = 0;
    for (const auto& [name, entry] : entries_)
        if (entry.group == group) n += entry.tensor->numel();
    return n;
}

void ParamStore::zero_grads() {
    for (auto& [name, entry] : entries_) entry.tensor->zero_grad();
}

void ParamStore::note_stage(const std::set<ParamGroup>& groups) {
    for (ParamGroup g : groups)
        ++stage_counts_[static_cast<std::size_t>(g)];
}

std::uint32_t ParamStore::stage_count(ParamGroup group) const {
    return stage_counts_[static_cast<std::size_t>(group)];
}

}  // namespace draft
