#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace draft::config {

// Flat `[section]` / `key = value` text. Full-line comments start with '#'
// or ';' (leading whitespace allowed); values run to the end of the line
// with surrounding whitespace trimmed; duplicate keys and sections are
// rejected with both line numbers. Every diagnostic carries
// "<source>:<line>".

struct IniEntry {
    std::string key;
    std::string value;
    int line = 0;
};

struct IniSection {
    std::string name;
    int line = 0;
    std::vector<IniEntry> entries;

    const IniEntry* find(const std::string& key) const;
};

struct IniFile {
    std::string source;  // name used in diagnostics
    std::vector<IniSection> sections;

    const IniSection* find(const std::string& name) const;
};

IniFile parse_ini(const std::string& text, const std::string& source_name);
IniFile load_ini(const std::string& path);

// Candidate with the smallest edit distance to `word`, for "did you mean"
// hints; empty when there are no candidates.
std::string nearest(const std::string& word,
                    const std::vector<std::string>& candidates);

// Shortest decimal form that parses back to exactly the same value, so a
// written config echoes byte-for-byte through a parse.
std::string format_double(double value);

// Typed view over one section with a fixed key inventory. Construction
// rejects keys outside the inventory, naming the nearest valid one; the
// typed getters reject malformed values; both cite the offending line.
// A missing section yields a reader whose getters all return their
// fallbacks.
class SectionReader {
  public:
    SectionReader(const IniFile& file, const std::string& name,
                  std::vector<std::string> known_keys);

    bool section_present() const { return section_ != nullptr; }
    bool has(const std::string& key) const;

    std::string get_string(const std::string& key,
                           const std::string& fallback) const;
    std::string require_string(const std::string& key) const;
    std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
    std::uint64_t get_u64(const std::string& key,
                          std::uint64_t fallback) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    // Configuration errors anchored to the section header, a key's line, or
    // the whole file when the section is absent.
    [[noreturn]] void fail(const std::string& message) const;
    [[noreturn]] void fail_key(const std::string& key,
                               const std::string& message) const;

    const std::string& section_name() const { return name_; }

  private:
    const IniEntry* entry(const std::string& key) const;

    const IniFile* file_;
    std::string name_;
    const IniSection* section_;
};

}  // namespace draft::config
