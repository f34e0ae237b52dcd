#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "promet/episodes.hpp"
#include "promet/errors.hpp"
#include "promet/synthetic.hpp"

using namespace promet;

namespace {

Dataset tiny_dataset() {
    // Sentences with one mention of PER each, plus combined and LOC sentences.
    Dataset d;
    d.label_set = make_label_set({"PER", "LOC"});
    auto add = [&](std::vector<std::string> toks, std::vector<LabelId> labs) {
        d.sentences.push_back({std::move(toks), std::move(labs)});
    };
    add({"alice", "runs"}, {1, 0});
    add({"bob", "sits"}, {1, 0});
    add({"carol", "waits"}, {1, 0});
    add({"in", "paris"}, {0, 2});
    add({"near", "rome"}, {0, 2});
    return d;
}

Dataset small_synthetic() {
    SyntheticConfig cfg;
    cfg.sentences = 300;
    cfg.entity_types = 6;
    cfg.suffixes_per_type = 8;
    cfg.seed = 5;
    return make_synthetic_dataset(cfg);
}

}  // namespace

TEST_CASE("mention_counts counts maximal runs") {
    LabeledSentence s{{"a", "b", "c", "d", "e", "f"}, {1, 1, 0, 2, 0, 1}};
    auto counts = mention_counts(s, 3);
    CHECK(counts == std::vector<int>{0, 2, 1});
}

TEST_CASE("one-shot sampling from redundant singletons keeps exactly one sentence") {
    Dataset d = tiny_dataset();
    d.sentences.resize(3);  // three PER singletons
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed);
        auto support = sample_entity_set(d, {1}, 1, rng);
        CHECK(support.size() == 1);
    }
}

TEST_CASE("labels spread over disjoint sentences are all collected") {
    Dataset d;
    d.label_set = make_label_set({"A", "B"});
    d.sentences.push_back({{"x"}, {1}});
    d.sentences.push_back({{"y"}, {2}});
    Rng rng(0);
    auto support = sample_entity_set(d, {1, 2}, 1, rng);
    CHECK(support.size() == 2);
}

TEST_CASE("insufficient data names the deficient label") {
    Dataset d = tiny_dataset();
    Rng rng(0);
    try {
        sample_entity_set(d, {2}, 5, rng);  // only two LOC mentions exist
        FAIL("expected DataError");
    } catch (const DataError& e) {
        std::string msg = e.what();
        CHECK(msg.find("insufficient data") != std::string::npos);
        CHECK(msg.find("LOC") != std::string::npos);
    }
}

TEST_CASE("sentences with out-of-target entities are not candidates") {
    Dataset d;
    d.label_set = make_label_set({"A", "B"});
    d.sentences.push_back({{"x", "z"}, {1, 2}});  // contains B, excluded for target {A}
    d.sentences.push_back({{"y"}, {1}});
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        Rng rng(seed);
        auto support = sample_entity_set(d, {1}, 1, rng);
        REQUIRE(support.size() == 1);
        CHECK(support[0].tokens == std::vector<std::string>{"y"});
    }
}

TEST_CASE("sampled supports satisfy the occurrence window and minimality") {
    Dataset d = small_synthetic();
    std::vector<LabelId> targets{1, 2, 3};
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        Rng rng(seed);
        auto support = sample_entity_set(d, targets, 2, rng);
        CHECK(entity_set_valid(support, d.label_set.size(), targets, 2));
    }
}

TEST_CASE("entity_set_valid spots violations") {
    Dataset d;
    d.label_set = make_label_set({"A", "B"});
    LabeledSentence a{{"x"}, {1}};
    LabeledSentence b{{"y"}, {2}};

    CHECK(entity_set_valid({a, b}, 3, {1, 2}, 1));
    // label B missing
    CHECK_FALSE(entity_set_valid({a}, 3, {1, 2}, 1));
    // out-of-target label present
    CHECK_FALSE(entity_set_valid({a, b}, 3, {1}, 1));
    // removable sentence: three copies of a, counts 3 > 2k for k=1
    CHECK_FALSE(entity_set_valid({a, a, a}, 3, {1}, 1));
    // two copies: count 2 == 2k but either copy can be removed
    CHECK_FALSE(entity_set_valid({a, a}, 3, {1}, 1));
}

TEST_CASE("episodes pick way targets and stay disjoint from the query pool") {
    Dataset d = small_synthetic();
    SamplerConfig cfg;
    cfg.way = 3;
    cfg.shot = 2;
    cfg.query_shot = 1;
    cfg.seed = 17;
    Rng rng(cfg.seed);
    Episode ep = sample_episode(d, cfg, rng);

    CHECK(ep.target_labels.size() == 3);
    CHECK(std::is_sorted(ep.target_labels.begin(), ep.target_labels.end()));
    CHECK(entity_set_valid(ep.support, d.label_set.size(), ep.target_labels, 2));
    CHECK(entity_set_valid(ep.query, d.label_set.size(), ep.target_labels, 1));

    // Every sampled sentence exists in the corpus, and support multiset plus
    // query multiset never exceeds the corpus multiplicity of any sentence.
    auto key = [](const LabeledSentence& s) {
        std::string k;
        for (const auto& t : s.tokens) k += t + "\x1f";
        for (LabelId l : s.labels) k += std::to_string(l) + "\x1f";
        return k;
    };
    std::multiset<std::string> corpus;
    for (const auto& s : d.sentences) corpus.insert(key(s));
    std::multiset<std::string> used;
    for (const auto& s : ep.support) used.insert(key(s));
    for (const auto& s : ep.query) used.insert(key(s));
    for (const auto& k : used) {
        CHECK(used.count(k) <= corpus.count(k));
    }
}

TEST_CASE("sampling is reproducible and seed-sensitive") {
    Dataset d = small_synthetic();
    SamplerConfig cfg;
    cfg.way = 3;
    cfg.shot = 1;
    cfg.query_shot = 1;
    cfg.seed = 9;
    auto a = sample_episodes(d, cfg, 5);
    auto b = sample_episodes(d, cfg, 5);
    CHECK(a == b);
    CHECK(a.size() == 5);
    for (int i = 0; i < 5; ++i) {
        CHECK(a[i].seed == cfg.seed + static_cast<std::uint64_t>(i));
    }

    cfg.seed = 10;
    auto c = sample_episodes(d, cfg, 5);
    CHECK(a != c);
}

TEST_CASE("way larger than the label inventory is rejected") {
    Dataset d = tiny_dataset();
    SamplerConfig cfg;
    cfg.way = 5;
    Rng rng(0);
    CHECK_THROWS_AS(sample_episode(d, cfg, rng), DataError);
}

TEST_CASE("low-resource sampling partitions the dataset") {
    Dataset d = small_synthetic();
    Rng rng(3);
    auto [support, query] = sample_low_resource(d, 1, rng);
    CHECK(support.size() + query.size() == d.sentences.size());
    CHECK(!support.empty());
    std::vector<LabelId> all_targets;
    for (LabelId id = 1; id < d.label_set.size(); ++id) all_targets.push_back(id);
    CHECK(entity_set_valid(support, d.label_set.size(), all_targets, 1));
}

TEST_CASE("episode serialization round-trips") {
    Dataset d = small_synthetic();
    SamplerConfig cfg;
    cfg.way = 2;
    cfg.shot = 1;
    cfg.query_shot = 1;
    cfg.seed = 4;
    auto episodes = sample_episodes(d, cfg, 3);

    std::string text = episodes_to_jsonl(episodes, d.label_set);
    auto back = episodes_from_jsonl(text, d.label_set);
    CHECK(back == episodes);
}

TEST_CASE("serialized episodes carry validity flags when given") {
    Dataset d = small_synthetic();
    auto episodes = sample_episodes(d, SamplerConfig{2, 1, 1, 4}, 2);
    std::vector<bool> valid{true, false};
    std::string text = episodes_to_jsonl(episodes, d.label_set, &valid);
    CHECK(text.find("\"valid\":true") != std::string::npos);
    CHECK(text.find("\"valid\":false") != std::string::npos);
}

TEST_CASE("jsonl reader skips comments and reports bad lines") {
    Dataset d = small_synthetic();
    auto episodes = sample_episodes(d, SamplerConfig{2, 1, 1, 4}, 1);
    std::string text = "# a comment\n\n" + episodes_to_jsonl(episodes, d.label_set);
    CHECK(episodes_from_jsonl(text, d.label_set).size() == 1);

    try {
        episodes_from_jsonl("not json\n", d.label_set);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("line 1") != std::string::npos);
    }

    std::string unknown = R"({"support":[{"tokens":["x"],"labels":["GHOST"]}],)"
                          R"("query":[],"target_labels":[],"seed":0})";
    CHECK_THROWS_AS(episodes_from_jsonl(unknown + "\n", d.label_set), DataError);
}
