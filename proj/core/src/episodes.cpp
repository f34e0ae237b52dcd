#include "promet/episodes.hpp"

#include <algorithm>
#include <sstream>

#include "json.hpp"
#include "promet/errors.hpp"
#include "promet/span_metrics.hpp"

namespace promet {

namespace {

std::vector<std::size_t> greedy_entity_set(const Dataset& d,
                                           const std::vector<std::size_t>& pool,
                                           const std::vector<LabelId>& targets, int k, Rng& rng) {
    if (k < 1) throw DataError("sample_entity_set: k must be >= 1");
    if (targets.empty()) throw DataError("sample_entity_set: empty target set");
    for (LabelId t : targets) {
        if (!d.label_set.contains(t) || t == LabelSet::kOutside) {
            throw DataError("sample_entity_set: invalid target label id " + std::to_string(t));
        }
    }
    std::vector<bool> is_target(d.label_set.size(), false);
    for (LabelId t : targets) is_target[t] = true;

    std::vector<std::size_t> candidates;
    std::vector<std::vector<int>> counts_of(d.sentences.size());
    for (std::size_t idx : pool) {
        auto counts = mention_counts(d.sentences[idx], d.label_set.size());
        bool inside = true;
        for (LabelId lab = 1; lab < d.label_set.size(); ++lab) {
            if (counts[lab] > 0 && !is_target[lab]) {
                inside = false;
                break;
            }
        }
        if (inside) {
            counts_of[idx] = std::move(counts);
            candidates.push_back(idx);
        }
    }
    rng.shuffle(candidates);

    std::vector<long long> total(d.label_set.size(), 0);
    std::vector<std::size_t> picked;
    auto all_satisfied = [&] {
        for (LabelId t : targets) {
            if (total[t] < k) return false;
        }
        return true;
    };
    for (std::size_t idx : candidates) {
        if (all_satisfied()) break;
        const auto& c = counts_of[idx];
        bool helps = false;
        bool fits = true;
        for (LabelId t : targets) {
            if (c[t] > 0 && total[t] < k) helps = true;
            if (total[t] + c[t] > 2LL * k) fits = false;
        }
        if (helps && fits) {
            picked.push_back(idx);
            for (LabelId t : targets) total[t] += c[t];
        }
    }
    if (!all_satisfied()) {
        for (LabelId t : targets) {
            if (total[t] < k) {
                throw DataError("insufficient data: label " + d.label_set.names[t] + " reached " +
                                std::to_string(total[t]) + " of " + std::to_string(k) +
                                " required mentions");
            }
        }
    }

    std::vector<bool> keep(picked.size(), true);
    for (std::size_t r = picked.size(); r-- > 0;) {
        const auto& c = counts_of[picked[r]];
        bool removable = true;
        for (LabelId t : targets) {
            if (total[t] - c[t] < k) {
                removable = false;
                break;
            }
        }
        if (removable) {
            keep[r] = false;
            for (LabelId t : targets) total[t] -= c[t];
        }
    }
    std::vector<std::size_t> result;
    for (std::size_t r = 0; r < picked.size(); ++r) {
        if (keep[r]) result.push_back(picked[r]);
    }
    return result;
}

std::vector<std::size_t> full_pool(const Dataset& d) {
    std::vector<std::size_t> pool(d.sentences.size());
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
    return pool;
}

}  // namespace

std::vector<int> mention_counts(const LabeledSentence& s, int label_count) {
    std::vector<int> counts(label_count, 0);
    for (const auto& span : spans_from_io(s.labels)) {
        if (span.label < 0 || span.label >= label_count) {
            throw DataError("mention_counts: label id " + std::to_string(span.label) +
                            " out of range");
        }
        ++counts[span.label];
    }
    return counts;
}

std::vector<LabeledSentence> sample_entity_set(const Dataset& d,
                                               const std::vector<LabelId>& targets, int k,
                                               Rng& rng) {
    auto idx = greedy_entity_set(d, full_pool(d), targets, k, rng);
    std::vector<LabeledSentence> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(d.sentences[i]);
    return out;
}

Episode sample_episode(const Dataset& d, const SamplerConfig& cfg, Rng& rng) {
    if (cfg.way < 1) throw DataError("sample_episode: way must be >= 1");
    int entity_labels = d.label_set.size() - 1;
    if (entity_labels < cfg.way) {
        throw DataError("sample_episode: dataset has " + std::to_string(entity_labels) +
                        " entity labels, need " + std::to_string(cfg.way));
    }
    std::vector<LabelId> labels(entity_labels);
    for (int i = 0; i < entity_labels; ++i) labels[i] = i + 1;
    rng.shuffle(labels);
    labels.resize(cfg.way);
    std::sort(labels.begin(), labels.end());

    auto support_idx = greedy_entity_set(d, full_pool(d), labels, cfg.shot, rng);
    std::vector<bool> used(d.sentences.size(), false);
    for (std::size_t i : support_idx) used[i] = true;
    std::vector<std::size_t> rest;
    for (std::size_t i = 0; i < d.sentences.size(); ++i) {
        if (!used[i]) rest.push_back(i);
    }
    auto query_idx = greedy_entity_set(d, rest, labels, cfg.query_shot, rng);

    Episode ep;
    ep.target_labels = labels;
    for (std::size_t i : support_idx) ep.support.push_back(d.sentences[i]);
    for (std::size_t i : query_idx) ep.query.push_back(d.sentences[i]);
    return ep;
}

std::vector<Episode> sample_episodes(const Dataset& d, const SamplerConfig& cfg, int count) {
    std::vector<Episode> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) {
        std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(i);
        Rng rng(seed);
        Episode ep = sample_episode(d, cfg, rng);
        ep.seed = seed;
        out.push_back(std::move(ep));
    }
    return out;
}

std::pair<std::vector<LabeledSentence>, std::vector<LabeledSentence>> sample_low_resource(
    const Dataset& d_test, int k, Rng& rng) {
    int entity_labels = d_test.label_set.size() - 1;
    if (entity_labels < 1) throw DataError("sample_low_resource: dataset has no entity labels");
    std::vector<LabelId> targets(entity_labels);
    for (int i = 0; i < entity_labels; ++i) targets[i] = i + 1;

    auto support_idx = greedy_entity_set(d_test, full_pool(d_test), targets, k, rng);
    std::vector<bool> used(d_test.sentences.size(), false);
    for (std::size_t i : support_idx) used[i] = true;

    std::vector<LabeledSentence> support, query;
    for (std::size_t i : support_idx) support.push_back(d_test.sentences[i]);
    for (std::size_t i = 0; i < d_test.sentences.size(); ++i) {
        if (!used[i]) query.push_back(d_test.sentences[i]);
    }
    return {std::move(support), std::move(query)};
}

namespace {

nlohmann::json sentence_to_json(const LabeledSentence& s, const LabelSet& ls) {
    nlohmann::json j;
    j["tokens"] = s.tokens;
    auto& names = j["labels"] = nlohmann::json::array();
    for (LabelId id : s.labels) names.push_back(ls.names.at(id));
    return j;
}

LabeledSentence sentence_from_json(const nlohmann::json& j, const LabelSet& ls) {
    LabeledSentence s;
    s.tokens = j.at("tokens").get<std::vector<std::string>>();
    for (const auto& name : j.at("labels")) {
        LabelId id = ls.find(name.get<std::string>());
        if (id < 0) throw DataError("episode references unknown label " + name.get<std::string>());
        s.labels.push_back(id);
    }
    if (s.tokens.size() != s.labels.size()) {
        throw ParseError("episode sentence has mismatched tokens and labels");
    }
    return s;
}

}  // namespace

bool entity_set_valid(const std::vector<LabeledSentence>& sentences, int label_count,
                      const std::vector<LabelId>& targets, int k) {
    std::vector<bool> is_target(label_count, false);
    for (LabelId t : targets) is_target[t] = true;

    std::vector<std::vector<int>> counts;
    counts.reserve(sentences.size());
    std::vector<long long> total(label_count, 0);
    for (const auto& s : sentences) {
        counts.push_back(mention_counts(s, label_count));
        for (LabelId lab = 1; lab < label_count; ++lab) {
            if (counts.back()[lab] > 0 && !is_target[lab]) return false;
            total[lab] += counts.back()[lab];
        }
    }
    for (LabelId t : targets) {
        if (total[t] < k || total[t] > 2LL * k) return false;
    }
    for (const auto& c : counts) {
        bool removable = true;
        for (LabelId t : targets) {
            if (total[t] - c[t] < k) {
                removable = false;
                break;
            }
        }
        if (removable) return false;
    }
    return true;
}

std::string episodes_to_jsonl(const std::vector<Episode>& episodes, const LabelSet& ls,
                              const std::vector<bool>* valid) {
    if (valid && valid->size() != episodes.size()) {
        throw DataError("episodes_to_jsonl: valid flags do not parallel episodes");
    }
    std::string out;
    for (std::size_t e = 0; e < episodes.size(); ++e) {
        const auto& ep = episodes[e];
        nlohmann::json j;
        auto& sup = j["support"] = nlohmann::json::array();
        for (const auto& s : ep.support) sup.push_back(sentence_to_json(s, ls));
        auto& qry = j["query"] = nlohmann::json::array();
        for (const auto& s : ep.query) qry.push_back(sentence_to_json(s, ls));
        auto& tl = j["target_labels"] = nlohmann::json::array();
        for (LabelId id : ep.target_labels) tl.push_back(ls.names.at(id));
        j["seed"] = ep.seed;
        if (valid) j["valid"] = (*valid)[e];
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::vector<Episode> episodes_from_jsonl(const std::string& text, const LabelSet& ls) {
    std::vector<Episode> episodes;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError("episode line " + std::to_string(line_no) + ": " + e.what());
        }
        try {
            Episode ep;
            for (const auto& sj : j.at("support")) ep.support.push_back(sentence_from_json(sj, ls));
            for (const auto& sj : j.at("query")) ep.query.push_back(sentence_from_json(sj, ls));
            for (const auto& name : j.at("target_labels")) {
                LabelId id = ls.find(name.get<std::string>());
                if (id < 0) {
                    throw DataError("episode references unknown label " + name.get<std::string>());
                }
                ep.target_labels.push_back(id);
            }
            ep.seed = j.value("seed", std::uint64_t{0});
            episodes.push_back(std::move(ep));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("episode line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return episodes;
}

}  // namespace promet
