#include "draftlab/text.hpp"

#include "draftlab/error.hpp"

#include <array>

namespace draft::text {

namespace {

constexpr char kAlphabet[] = "abcdefghijklmnopqrstuvwxyz '";

// 256-entry char -> id table, 0 for characters outside the alphabet.
std::array<int, 256> build_lookup() {
    std::array<int, 256> table{};
    int id = 1;
    for (const char* c = kAlphabet; *c; ++c)
        table[static_cast<unsigned char>(*c)] = id++;
    return table;
}

const std::array<int, 256>& lookup() {
    static const std::array<int, 256> table = build_lookup();
    return table;
}

}  // namespace

const std::string& alphabet() {
    static const std::string a = kAlphabet;
    return a;
}

int vocab_size() { return static_cast<int>(alphabet().size()) + 1; }

std::vector<int> tokenize(const std::string& transcript) {
    std::vector<int> ids;
    ids.reserve(transcript.size());
    for (std::size_t pos = 0; pos < transcript.size(); ++pos) {
        const unsigned char c = static_cast<unsigned char>(transcript[pos]);
        const int id = lookup()[c];
        if (id == 0)
            fail(ErrorCode::kTokenization,
                 "character '" + std::string(1, transcript[pos]) +
                     "' at position " + std::to_string(pos) +
                     " is outside the alphabet");
        ids.push_back(id);
    }
    return ids;
}

std::string detokenize(const std::vector<int>& ids) {
    std::string out;
    out.reserve(ids.size());
    const int n = static_cast<int>(alphabet().size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const int id = ids[i];
        if (id < 1 || id > n)
            fail(ErrorCode::kTokenization,
                 "id " + std::to_string(id) + " at position " +
                     std::to_string(i) + " is not a character id");
        out.push_back(alphabet()[static_cast<std::size_t>(id - 1)]);
    }
    return out;
}

}  // namespace draft::text
