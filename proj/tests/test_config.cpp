#include "draftlab/config.hpp"

#include "draftlab/error.hpp"

#include <doctest.h>

#include <charconv>
#include <functional>
#include <string>
#include <vector>

using namespace draft;

namespace {

std::string error_message(const std::function<void()>& body) {
    try {
        body();
    } catch (const Error& e) {
        return e.what();
    }
    return "";
}

bool contains(const std::string& text, const std::string& needle) {
    return text.find(needle) != std::string::npos;
}

}  // namespace

TEST_CASE("the parser keeps sections, keys, lines, and trimming straight") {
    const std::string text =
        "# heading comment\n"
        "[experiment]\n"
        "regime = draft_self \n"
        "  seed=41\n"
        "; another comment\n"
        "\n"
        "[model]\n"
        "d_ada = 64\n";
    auto file = config::parse_ini(text, "demo.ini");
    CHECK(file.source == "demo.ini");
    REQUIRE(file.sections.size() == 2);
    CHECK(file.sections[0].name == "experiment");
    CHECK(file.sections[0].line == 2);
    REQUIRE(file.sections[0].entries.size() == 2);
    CHECK(file.sections[0].entries[0].key == "regime");
    CHECK(file.sections[0].entries[0].value == "draft_self");
    CHECK(file.sections[0].entries[0].line == 3);
    CHECK(file.sections[0].entries[1].key == "seed");
    CHECK(file.sections[0].entries[1].value == "41");
    const auto* model = file.find("model");
    REQUIRE(model != nullptr);
    const auto* entry = model->find("d_ada");
    REQUIRE(entry != nullptr);
    CHECK(entry->value == "64");
    CHECK(file.find("absent") == nullptr);
    CHECK(model->find("absent") == nullptr);
}

TEST_CASE("values keep their inner spaces and punctuation") {
    auto file = config::parse_ini("[data]\npath = /tmp/a b/c.tsv\n", "x");
    CHECK(file.sections[0].entries[0].value == "/tmp/a b/c.tsv");
}

TEST_CASE("malformed input is rejected with the line that broke") {
    auto msg = error_message(
        [] { config::parse_ini("[a]\nnot a pair\n", "bad.ini"); });
    CHECK(contains(msg, "bad.ini:2"));
    CHECK(contains(msg, "expected 'key = value'"));

    msg = error_message([] { config::parse_ini("k = v\n", "bad.ini"); });
    CHECK(contains(msg, "before any [section]"));

    msg = error_message([] { config::parse_ini("[a]\nk =\n", "bad.ini"); });
    CHECK(contains(msg, "empty value"));

    msg = error_message([] { config::parse_ini("[a]\n = v\n", "bad.ini"); });
    CHECK(contains(msg, "missing key"));

    msg = error_message([] { config::parse_ini("[a\n", "bad.ini"); });
    CHECK(contains(msg, "closing ']'"));

    msg = error_message([] { config::parse_ini("[ ]\n", "bad.ini"); });
    CHECK(contains(msg, "empty section name"));
}

TEST_CASE("duplicates report both line numbers") {
    auto msg = error_message(
        [] { config::parse_ini("[a]\nk = 1\nk = 2\n", "dup.ini"); });
    CHECK(contains(msg, "dup.ini:3"));
    CHECK(contains(msg, "already set on line 2"));

    msg = error_message(
        [] { config::parse_ini("[a]\n[b]\n[a]\n", "dup.ini"); });
    CHECK(contains(msg, "dup.ini:3"));
    CHECK(contains(msg, "already appeared on line 1"));
}

TEST_CASE("loading a missing file is a usage error") {
    try {
        config::load_ini("/nonexistent/nowhere.ini");
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::kUsage);
    }
}

TEST_CASE("nearest picks the closest candidate") {
    std::vector<std::string> keys = {"steps", "batch_size", "schedule"};
    CHECK(config::nearest("step", keys) == "steps");
    CHECK(config::nearest("batchsize", keys) == "batch_size");
    CHECK(config::nearest("schedul", keys) == "schedule");
    CHECK(config::nearest("anything", {}) == "");
}

TEST_CASE("format_double survives a round trip for awkward values") {
    for (double v : {0.065, 1e-9, 3e-5, 0.1, 2.0 / 3.0, 12345.6789, 0.0,
                     -7.25, 1e300}) {
        const std::string s = config::format_double(v);
        double back = 0;
        auto res = std::from_chars(s.data(), s.data() + s.size(), back);
        REQUIRE(res.ec == std::errc{});
        CHECK(back == v);
    }
    CHECK(config::format_double(0.05) == "0.05");
    CHECK(config::format_double(2.0) == "2");
}

TEST_CASE("a section reader hands out typed values with defaults") {
    auto file = config::parse_ini(
        "[adapt]\n"
        "steps = 500\n"
        "peak_lr = 2e-3\n"
        "warm = true\n"
        "label = noam\n",
        "r.ini");
    config::SectionReader reader(file, "adapt",
                                 {"steps", "peak_lr", "warm", "label"});
    CHECK(reader.section_present());
    CHECK(reader.section_name() == "adapt");
    CHECK(reader.has("steps"));
    CHECK(!reader.has("missing"));
    CHECK(reader.get_int("steps", 7) == 500);
    CHECK(reader.get_int("absent", 7) == 7);
    CHECK(reader.get_u64("steps", 9) == 500);
    CHECK(reader.get_double("peak_lr", 0.0) == 2e-3);
    CHECK(reader.get_bool("warm", false) == true);
    CHECK(reader.get_string("label", "x") == "noam");
    CHECK(reader.get_string("absent", "x") == "x");
    CHECK(reader.require_string("label") == "noam");
}

TEST_CASE("a missing section reads as all defaults") {
    auto file = config::parse_ini("[other]\nk = 1\n", "r.ini");
    config::SectionReader reader(file, "adapt", {"steps"});
    CHECK(!reader.section_present());
    CHECK(!reader.has("steps"));
    CHECK(reader.get_int("steps", 123) == 123);
    auto msg =
        error_message([&] { (void)reader.require_string("steps"); });
    CHECK(contains(msg, "missing required key 'steps'"));
    CHECK(contains(msg, "[adapt]"));
}

TEST_CASE("unknown keys are rejected at construction with a hint") {
    auto file = config::parse_ini("[adapt]\nstep = 5\n", "r.ini");
    auto msg = error_message([&] {
        config::SectionReader reader(file, "adapt",
                                     {"steps", "batch_size"});
    });
    CHECK(contains(msg, "r.ini:2"));
    CHECK(contains(msg, "unknown key 'step' in [adapt]"));
    CHECK(contains(msg, "did you mean 'steps'?"));
}

TEST_CASE("malformed values name the key, the line, and what was expected") {
    auto file = config::parse_ini(
        "[adapt]\n"
        "steps = abc\n"
        "count = -3\n"
        "rate = fast\n"
        "flag = yes\n"
        "part = 12x\n",
        "r.ini");
    config::SectionReader reader(
        file, "adapt", {"steps", "count", "rate", "flag", "part"});

    auto msg = error_message([&] { (void)reader.get_int("steps", 0); });
    CHECK(contains(msg, "r.ini:2"));
    CHECK(contains(msg, "steps expects an integer, got 'abc'"));

    msg = error_message([&] { (void)reader.get_u64("count", 0); });
    CHECK(contains(msg, "non-negative integer"));

    msg = error_message([&] { (void)reader.get_double("rate", 0.0); });
    CHECK(contains(msg, "rate expects a number, got 'fast'"));

    msg = error_message([&] { (void)reader.get_bool("flag", false); });
    CHECK(contains(msg, "flag expects true or false, got 'yes'"));

    msg = error_message([&] { (void)reader.get_int("part", 0); });
    CHECK(contains(msg, "part expects an integer, got '12x'"));
}
