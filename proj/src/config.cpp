#include "draftlab/config.hpp"

#include "draftlab/error.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <sstream>

namespace draft::config {

namespace {

std::string trim(const std::string& s) {
    auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return "";
    auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::string where(const std::string& source, int line) {
    return source + ":" + std::to_string(line) + ": ";
}

// Classic unit-cost edit distance; the inputs here are short key names.
int edit_distance(const std::string& a, const std::string& b) {
    std::vector<int> row(b.size() + 1);
    std::iota(row.begin(), row.end(), 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        int diag = row[0];
        row[0] = static_cast<int>(i);
        for (std::size_t j = 1; j <= b.size(); ++j) {
            int next = std::min({row[j] + 1, row[j - 1] + 1,
                                 diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
            diag = row[j];
            row[j] = next;
        }
    }
    return row[b.size()];
}

}  // namespace

const IniEntry* IniSection::find(const std::string& key) const {
    for (const auto& e : entries)
        if (e.key == key) return &e;
    return nullptr;
}

const IniSection* IniFile::find(const std::string& name) const {
    for (const auto& s : sections)
        if (s.name == name) return &s;
    return nullptr;
}

IniFile parse_ini(const std::string& text, const std::string& source_name) {
    IniFile file;
    file.source = source_name;

    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    IniSection* open = nullptr;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string line = trim(raw);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;

        if (line.front() == '[') {
            check(line.back() == ']', ErrorCode::kConfig,
                  where(source_name, line_no) +
                      "section header is missing its closing ']'");
            const std::string name = trim(line.substr(1, line.size() - 2));
            check(!name.empty(), ErrorCode::kConfig,
                  where(source_name, line_no) + "empty section name");
            if (const auto* dup = file.find(name))
                fail(ErrorCode::kConfig,
                     where(source_name, line_no) + "section [" + name +
                         "] already appeared on line " +
                         std::to_string(dup->line));
            file.sections.push_back({name, line_no, {}});
            open = &file.sections.back();
            continue;
        }

        const auto eq = line.find('=');
        check(eq != std::string::npos, ErrorCode::kConfig,
              where(source_name, line_no) + "expected 'key = value', got '" +
                  line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        check(!key.empty(), ErrorCode::kConfig,
              where(source_name, line_no) + "missing key before '='");
        check(!value.empty(), ErrorCode::kConfig,
              where(source_name, line_no) + "key '" + key +
                  "' has an empty value");
        check(open != nullptr, ErrorCode::kConfig,
              where(source_name, line_no) + "key '" + key +
                  "' appears before any [section]");
        if (const auto* dup = open->find(key))
            fail(ErrorCode::kConfig,
                 where(source_name, line_no) + "key '" + key +
                     "' already set on line " + std::to_string(dup->line));
        open->entries.push_back({key, value, line_no});
    }
    return file;
}

IniFile load_ini(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    check(static_cast<bool>(in), ErrorCode::kUsage,
          "cannot open config file " + path);
    std::string text{std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>()};
    return parse_ini(text, path);
}

std::string nearest(const std::string& word,
                    const std::vector<std::string>& candidates) {
    std::string best;
    int best_cost = 0;
    for (const auto& c : candidates) {
        const int cost = edit_distance(word, c);
        if (best.empty() || cost < best_cost) {
            best = c;
            best_cost = cost;
        }
    }
    return best;
}

std::string format_double(double value) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

SectionReader::SectionReader(const IniFile& file, const std::string& name,
                             std::vector<std::string> known_keys)
    : file_(&file), name_(name), section_(file.find(name)) {
    if (section_ == nullptr) return;
    for (const auto& e : section_->entries) {
        if (std::find(known_keys.begin(), known_keys.end(), e.key) !=
            known_keys.end())
            continue;
        std::string hint = nearest(e.key, known_keys);
        draft::fail(ErrorCode::kConfig,
                    where(file_->source, e.line) + "unknown key '" + e.key +
                        "' in [" + name_ + "]" +
                        (hint.empty() ? "" : "; did you mean '" + hint +
                                                 "'?"));
    }
}

const IniEntry* SectionReader::entry(const std::string& key) const {
    return section_ == nullptr ? nullptr : section_->find(key);
}

bool SectionReader::has(const std::string& key) const {
    return entry(key) != nullptr;
}

std::string SectionReader::get_string(const std::string& key,
                                      const std::string& fallback) const {
    const auto* e = entry(key);
    return e == nullptr ? fallback : e->value;
}

std::string SectionReader::require_string(const std::string& key) const {
    const auto* e = entry(key);
    if (e == nullptr) fail("missing required key '" + key + "'");
    return e->value;
}

std::int64_t SectionReader::get_int(const std::string& key,
                                    std::int64_t fallback) const {
    const auto* e = entry(key);
    if (e == nullptr) return fallback;
    std::int64_t out = 0;
    auto res = std::from_chars(e->value.data(),
                               e->value.data() + e->value.size(), out);
    if (res.ec != std::errc{} || res.ptr != e->value.data() + e->value.size())
        fail_key(key, "expects an integer, got '" + e->value + "'");
    return out;
}

std::uint64_t SectionReader::get_u64(const std::string& key,
                                     std::uint64_t fallback) const {
    const auto* e = entry(key);
    if (e == nullptr) return fallback;
    std::uint64_t out = 0;
    auto res = std::from_chars(e->value.data(),
                               e->value.data() + e->value.size(), out);
    if (res.ec != std::errc{} || res.ptr != e->value.data() + e->value.size())
        fail_key(key, "expects a non-negative integer, got '" + e->value +
                          "'");
    return out;
}

double SectionReader::get_double(const std::string& key,
                                 double fallback) const {
    const auto* e = entry(key);
    if (e == nullptr) return fallback;
    double out = 0;
    auto res = std::from_chars(e->value.data(),
                               e->value.data() + e->value.size(), out);
    if (res.ec != std::errc{} || res.ptr != e->value.data() + e->value.size())
        fail_key(key, "expects a number, got '" + e->value + "'");
    return out;
}

bool SectionReader::get_bool(const std::string& key, bool fallback) const {
    const auto* e = entry(key);
    if (e == nullptr) return fallback;
    if (e->value == "true") return true;
    if (e->value == "false") return false;
    fail_key(key, "expects true or false, got '" + e->value + "'");
}

void SectionReader::fail(const std::string& message) const {
    if (section_ != nullptr)
        draft::fail(ErrorCode::kConfig,
                    where(file_->source, section_->line) + "[" + name_ +
                        "]: " + message);
    draft::fail(ErrorCode::kConfig,
                file_->source + ": [" + name_ + "]: " + message);
}

void SectionReader::fail_key(const std::string& key,
                             const std::string& message) const {
    const auto* e = entry(key);
    if (e != nullptr)
        draft::fail(ErrorCode::kConfig,
                    where(file_->source, e->line) + key + " " + message);
    fail("'" + key + "' " + message);
}

}  // namespace draft::config
