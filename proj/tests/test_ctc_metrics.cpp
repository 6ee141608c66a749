#include "draftlab/metrics.hpp"

#include "draftlab/ctc.hpp"
#include "draftlab/error.hpp"
#include "draftlab/ops.hpp"
#include "draftlab/rng.hpp"
#include "draftlab/text.hpp"

#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

using namespace draft;

namespace {

model::ModelConfig toy_config() {
    auto cfg = model::ModelConfig::desk();
    cfg.d_model = 16;
    cfg.n_layers = 2;
    cfg.n_heads = 2;
    cfg.d_ff = 32;
    cfg.conv_mid = 12;
    cfg.in_dim = 8;
    return cfg;
}

// Every label path of length t is enumerated, collapsed (repeats merged,
// blanks dropped), and its probability added when it spells `labels`.
double brute_force_nll(const std::vector<double>& logp, int t, int vocab,
                       const std::vector<int>& labels) {
    std::vector<int> path(static_cast<std::size_t>(t), 0);
    double total = 0.0;
    for (;;) {
        std::vector<int> collapsed;
        int prev = 0;
        for (int f = 0; f < t; ++f) {
            const int s = path[static_cast<std::size_t>(f)];
            if (s != 0 && s != prev) collapsed.push_back(s);
            prev = s;
        }
        if (collapsed == labels) {
            double p = 1.0;
            for (int f = 0; f < t; ++f)
                p *= std::exp(logp[static_cast<std::size_t>(f) * vocab +
                                   path[static_cast<std::size_t>(f)]]);
            total += p;
        }
        int pos = t - 1;
        while (pos >= 0 && ++path[static_cast<std::size_t>(pos)] == vocab) {
            path[static_cast<std::size_t>(pos)] = 0;
            --pos;
        }
        if (pos < 0) break;
    }
    return total > 0.0 ? -std::log(total) : -1.0;  // -1 marks "no path"
}

// Row-normalized log scores so the brute force sums a true distribution.
std::vector<double> random_log_probs(Rng& rng, int t, int vocab) {
    std::vector<double> logp(static_cast<std::size_t>(t) * vocab);
    for (int f = 0; f < t; ++f) {
        double mx = -1e30;
        for (int v = 0; v < vocab; ++v) {
            logp[static_cast<std::size_t>(f) * vocab + v] = rng.normal();
            mx = std::max(mx, logp[static_cast<std::size_t>(f) * vocab + v]);
        }
        double z = 0.0;
        for (int v = 0; v < vocab; ++v)
            z += std::exp(logp[static_cast<std::size_t>(f) * vocab + v] - mx);
        const double log_z = mx + std::log(z);
        for (int v = 0; v < vocab; ++v)
            logp[static_cast<std::size_t>(f) * vocab + v] -= log_z;
    }
    return logp;
}

}  // namespace

TEST_CASE("ctc closed forms") {
    // One frame must emit the one label directly.
    std::vector<double> one = {std::log(0.1), std::log(0.9)};
    CHECK(ctc::forward_backward(one.data(), 1, 2, {1}, nullptr) ==
          doctest::Approx(-std::log(0.9)).epsilon(1e-9));

    // Two uniform frames: the paths (a,a), (a,-), (-,a) carry 3/4 total.
    std::vector<double> uniform(4, std::log(0.5));
    CHECK(ctc::forward_backward(uniform.data(), 2, 2, {1}, nullptr) ==
          doctest::Approx(-std::log(0.75)).epsilon(1e-9));

    // The graph op agrees with the raw core.
    auto t = make_tensor({2, 2});
    std::fill(t->data.begin(), t->data.end(),
              static_cast<real>(std::log(0.5)));
    CHECK(ops::ctc_loss(t, {1})->scalar() ==
          doctest::Approx(-std::log(0.75)).epsilon(1e-6));

    CHECK(ctc::min_frames({}) == 0);
    CHECK(ctc::min_frames({1}) == 1);
    CHECK(ctc::min_frames({1, 2}) == 2);
    CHECK(ctc::min_frames({1, 1}) == 3);
    CHECK(ctc::min_frames({1, 1, 2, 2}) == 6);
}

TEST_CASE("ctc matches exhaustive path enumeration on small cases") {
    Rng rng(401);
    const std::vector<std::vector<int>> label_sets = {
        {}, {1}, {2}, {1, 1}, {1, 2}, {2, 1}, {1, 2, 1}, {1, 1, 2}, {2, 2}};
    int feasible = 0;
    int infeasible = 0;
    for (int vocab : {2, 3}) {
        for (int t = 1; t <= 6; ++t) {
            const auto logp = random_log_probs(rng, t, vocab);
            for (const auto& labels : label_sets) {
                bool in_vocab = true;
                for (int lab : labels) in_vocab = in_vocab && lab < vocab;
                if (!in_vocab) continue;
                const double oracle = brute_force_nll(logp, t, vocab, labels);
                if (t >= ctc::min_frames(labels)) {
                    const double got = ctc::forward_backward(
                        logp.data(), t, vocab, labels, nullptr);
                    REQUIRE(oracle >= 0.0);
                    CHECK(got == doctest::Approx(oracle).epsilon(1e-6));
                    ++feasible;
                } else {
                    CHECK(oracle == -1.0);  // no path exists either
                    CHECK_THROWS_AS(ctc::forward_backward(logp.data(), t,
                                                          vocab, labels,
                                                          nullptr),
                                    Error);
                    ++infeasible;
                }
            }
        }
    }
    CHECK(feasible > 50);
    CHECK(infeasible > 10);
}

TEST_CASE("infeasible alignments name both lengths") {
    std::vector<double> logp(4, std::log(0.5));
    try {
        ctc::forward_backward(logp.data(), 2, 2, {1, 1}, nullptr);
        FAIL("expected an alignment error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::kInfeasibleAlignment);
        CHECK(std::string(e.what()).find("3") != std::string::npos);
        CHECK(std::string(e.what()).find("2") != std::string::npos);
    }
    auto t = make_tensor({2, 2});
    CHECK_THROWS_AS(ops::ctc_loss(t, {1, 1}), Error);
}

TEST_CASE("greedy decode collapses repeats and respects blanks") {
    // Frame argmax pattern: blank a a blank b b -> "ab".
    auto hot = [](int vocab, int id) {
        std::vector<real> row(static_cast<std::size_t>(vocab), real(-5));
        row[static_cast<std::size_t>(id)] = real(5);
        return row;
    };
    std::vector<real> frames;
    for (int id : {0, 1, 1, 0, 2, 2}) {
        auto row = hot(3, id);
        frames.insert(frames.end(), row.begin(), row.end());
    }
    CHECK(ctc::greedy_decode(frames.data(), 6, 3) == std::vector<int>{1, 2});

    // A blank between repeats keeps both.
    frames.clear();
    for (int id : {1, 0, 1}) {
        auto row = hot(2, id);
        frames.insert(frames.end(), row.begin(), row.end());
    }
    CHECK(ctc::greedy_decode(frames.data(), 3, 2) == std::vector<int>{1, 1});

    // Ties go to the lowest id.
    std::vector<real> tie = {real(0), real(5), real(5)};
    CHECK(ctc::greedy_decode(tie.data(), 1, 3) == std::vector<int>{1});

    // Property: the output is exactly the collapsed, de-blanked argmax path
    // (adjacent repeats in the output are legal when a blank separated them).
    Rng rng(17);
    for (int round = 0; round < 20; ++round) {
        auto logits = randn(rng, {40, 5}, 1.0);
        auto out = ctc::greedy_decode(logits->data.data(), 40, 5);
        std::vector<int> expect;
        int prev = 0;
        for (int f = 0; f < 40; ++f) {
            int best = 0;
            for (int v = 1; v < 5; ++v)
                if (logits->at(f, v) > logits->at(f, best)) best = v;
            if (best != 0 && best != prev) expect.push_back(best);
            prev = best;
        }
        CHECK(out == expect);
        for (int id : out) {
            CHECK(id >= 1);
            CHECK(id < 5);
        }
    }
}

TEST_CASE("edit distance: counts, symmetry, triangle inequality") {
    using metrics::edit_distance;
    using metrics::split_words;

    CHECK(split_words("  a  b c ") == std::vector<std::string>{"a", "b", "c"});
    CHECK(split_words("").empty());

    auto counts = edit_distance(split_words("a b c"), split_words("a x c"));
    CHECK(counts.substitutions == 1);
    CHECK(counts.insertions == 0);
    CHECK(counts.deletions == 0);

    counts = edit_distance(split_words("a"), split_words(""));
    CHECK(counts.deletions == 1);
    CHECK(counts.total() == 1);

    counts = edit_distance(split_words("b"), split_words("a b"));
    CHECK(counts.insertions == 1);
    CHECK(counts.total() == 1);

    CHECK(edit_distance(split_words("x y z"), split_words("x y z")).total() ==
          0);

    // Random word lists over a three-word vocabulary.
    Rng rng(4242);
    auto random_words = [&] {
        static const std::vector<std::string> vocab = {"a", "b", "c"};
        std::vector<std::string> words;
        const int n = static_cast<int>(rng.uniform_index(6));
        for (int i = 0; i < n; ++i)
            words.push_back(vocab[rng.uniform_index(3)]);
        return words;
    };
    for (int round = 0; round < 60; ++round) {
        const auto a = random_words();
        const auto b = random_words();
        const auto c = random_words();
        const auto ab = edit_distance(a, b);
        const auto ba = edit_distance(b, a);
        CHECK(ab.total() == ba.total());
        CHECK(ab.substitutions == ba.substitutions);
        CHECK(ab.insertions == ba.deletions);
        CHECK(ab.deletions == ba.insertions);
        CHECK(edit_distance(a, c).total() <=
              ab.total() + edit_distance(b, c).total());
        CHECK(edit_distance(a, a).total() == 0);
    }
}

TEST_CASE("corpus scoring and the report format") {
    std::vector<metrics::ScoreRecord> records = {
        {"u1", "a b c", "a x c"},
        {"u2", "a", ""},
    };
    auto score = metrics::score_corpus(records);
    CHECK(score.ref_words == 4);
    CHECK(score.totals.substitutions == 1);
    CHECK(score.totals.deletions == 1);
    CHECK(score.totals.insertions == 0);
    CHECK(score.wer == doctest::Approx(0.5));
    CHECK(score.utterances[0].counts.substitutions == 1);
    CHECK(score.utterances[1].counts.deletions == 1);

    auto single = metrics::score_corpus({{"u1", "a b c", "a x c"}});
    CHECK(single.wer == doctest::Approx(1.0 / 3.0));
    auto dropped = metrics::score_corpus({{"u1", "a", ""}});
    CHECK(dropped.wer == doctest::Approx(1.0));

    const auto report = metrics::format_report(score);
    CHECK(report.find("u1\ta b c\ta x c\t1,0,0\n") != std::string::npos);
    CHECK(report.find("u2\ta\t\t0,0,1\n") != std::string::npos);
    CHECK(report.find("WER\t0.500000\t1,0,1\tref_words=4\n") !=
          std::string::npos);

    try {
        metrics::score_corpus({{"u1", "", "a b"}});
        FAIL("expected an undefined-rate error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::kUndefinedWer);
    }
    CHECK_THROWS_AS(metrics::score_corpus({}), Error);
}

TEST_CASE("utterance decoding produces clean transcripts deterministically") {
    Rng rng(333);
    model::AcousticModel m(toy_config(), model::HeadKind::kAsr, 0, rng);
    Rng drng(9);
    auto x = randn(drng, {48, 8}, 1.0);
    const auto hyp = metrics::decode_utterance(m, x);
    CHECK(hyp == metrics::decode_utterance(m, x));
    for (char ch : hyp)
        CHECK(text::alphabet().find(ch) != std::string::npos);
}

TEST_CASE("batch ctc loss averages feasible items and counts the rest") {
    Rng rng(71);
    model::AcousticModel m(toy_config(), model::HeadKind::kAsr, 0, rng);
    Rng drng(21);

    data::Utterance shorty;
    shorty.id = "short";
    shorty.features = randn(drng, {4, 8}, 1.0);  // one encoder step
    shorty.transcript = {1, 2, 3};               // needs three
    data::Utterance okay;
    okay.id = "okay";
    okay.features = randn(drng, {40, 8}, 1.0);
    okay.transcript = text::tokenize("hi");
    data::Utterance second;
    second.id = "second";
    second.features = randn(drng, {36, 8}, 1.0);
    second.transcript = text::tokenize("yo");

    auto batches = data::make_batches({shorty, okay, second}, 3, 5, false);
    REQUIRE(batches.size() == 1);
    int skipped = 0;
    auto loss = metrics::asr_batch_loss(m, batches[0], &skipped);
    CHECK(skipped == 1);
    CHECK(loss->scalar() > 0.0);

    // The batch mean equals the mean of the per-utterance losses.
    auto direct = [&](const data::Utterance& u) {
        return ops::ctc_loss(
                   ops::log_softmax_rows(m.asr_logits(m.encode(u.features))),
                   u.transcript)
            ->scalar();
    };
    CHECK(loss->scalar() ==
          doctest::Approx((direct(okay) + direct(second)) / 2.0)
              .epsilon(1e-6));

    // Gradients flow back to the head.
    m.store().zero_grads();
    backward(loss);
    auto w = m.store().get("head.asr.w");
    REQUIRE(!w->grad.empty());
    double mag = 0.0;
    for (real g : w->grad) mag += std::abs(static_cast<double>(g));
    CHECK(mag > 0.0);

    // No feasible item leaves nothing to average.
    auto hopeless = data::make_batches({shorty}, 1, 5, false);
    int waste = 0;
    CHECK_THROWS_AS(metrics::asr_batch_loss(m, hopeless[0], &waste), Error);
}
