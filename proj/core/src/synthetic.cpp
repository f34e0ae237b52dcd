#include "promet/synthetic.hpp"

#include <array>

#include "promet/errors.hpp"
#include "promet/rng.hpp"

namespace promet {

namespace {

constexpr std::array<const char*, 12> kStems = {
    "blicket", "dapher", "fenwick", "gorlan", "hazzle", "jentry",
    "kimber",  "lombar", "merrin",  "norvel", "paldor", "quisset",
};

constexpr std::array<const char*, 24> kSuffixes = {
    "on",  "ar",  "el",  "us",  "ine", "or", "an",  "ix",  "ette", "ock", "ean", "ade",
    "ild", "orn", "ish", "ew",  "ia",  "ung", "ost", "alt", "iv",   "urn", "oth", "eze",
};

constexpr std::array<const char*, 20> kCommonFillers = {
    "the",  "a",    "near", "with",  "from",   "under",  "over",    "sees",   "finds", "takes",
    "holds", "buys", "old",  "new",  "red",    "tall",   "often",   "rarely", "quietly", "boldly",
};

constexpr std::array<const char*, 14> kSyllables = {
    "ta", "re", "mo", "li", "sun", "ver", "do", "pa", "ke", "nu", "sil", "gra", "fo", "bim",
};

std::vector<std::string> build_fillers(int count) {
    std::vector<std::string> out;
    out.reserve(count);
    for (int i = 0; i < count && i < static_cast<int>(kCommonFillers.size()); ++i) {
        out.emplace_back(kCommonFillers[i]);
    }
    int n = static_cast<int>(kSyllables.size());
    for (int i = static_cast<int>(out.size()); i < count; ++i) {
        int k = i - static_cast<int>(kCommonFillers.size());
        std::string w = std::string(kSyllables[k % n]) + kSyllables[(k / n) % n];
        if (k >= n * n) w += std::to_string(k / (n * n));
        out.push_back(std::move(w));
    }
    return out;
}

}  // namespace

Dataset make_synthetic_dataset(const SyntheticConfig& cfg) {
    if (cfg.sentences < 1) throw DataError("synthetic: sentences must be >= 1");
    if (cfg.entity_types < 1 || cfg.entity_types > static_cast<int>(kStems.size())) {
        throw DataError("synthetic: entity_types must lie in [1, " +
                        std::to_string(kStems.size()) + "]");
    }
    if (cfg.suffixes_per_type < 1 ||
        cfg.suffixes_per_type > static_cast<int>(kSuffixes.size())) {
        throw DataError("synthetic: suffixes_per_type must lie in [1, " +
                        std::to_string(kSuffixes.size()) + "]");
    }
    if (cfg.filler_words < 1) throw DataError("synthetic: filler_words must be >= 1");
    if (cfg.min_sentence_len < 1 || cfg.max_sentence_len < cfg.min_sentence_len) {
        throw DataError("synthetic: bad sentence length range");
    }
    if (cfg.min_mentions < 1 || cfg.max_mentions < cfg.min_mentions) {
        throw DataError("synthetic: bad mention count range");
    }
    if (!(cfg.two_token_frac >= 0.0 && cfg.two_token_frac <= 1.0)) {
        throw DataError("synthetic: two_token_frac must lie in [0,1]");
    }

    std::vector<std::string> stems(kStems.begin(), kStems.begin() + cfg.entity_types);
    auto fillers = build_fillers(cfg.filler_words);

    Dataset d;
    d.label_set = make_label_set(stems);
    Rng rng(cfg.seed);

    for (int si = 0; si < cfg.sentences; ++si) {
        int len = cfg.min_sentence_len +
                  static_cast<int>(rng.index(cfg.max_sentence_len - cfg.min_sentence_len + 1));
        int mentions = cfg.min_mentions +
                       static_cast<int>(rng.index(cfg.max_mentions - cfg.min_mentions + 1));

        struct Mention {
            LabelId label;
            std::vector<std::string> words;
        };
        std::vector<Mention> picked;
        int mention_tokens = 0;
        for (int mi = 0; mi < mentions; ++mi) {
            Mention m;
            int type = static_cast<int>(rng.index(cfg.entity_types));
            m.label = type + 1;
            int words = rng.uniform() < cfg.two_token_frac ? 2 : 1;
            for (int w = 0; w < words; ++w) {
                m.words.push_back(stems[type] +
                                  kSuffixes[rng.index(cfg.suffixes_per_type)]);
            }
            mention_tokens += words;
            picked.push_back(std::move(m));
        }
        // Each pair of mentions needs a separating filler; shrink until the
        // sentence budget holds everything.
        while (picked.size() > 1 &&
               mention_tokens + static_cast<int>(picked.size()) - 1 > len) {
            mention_tokens -= static_cast<int>(picked.back().words.size());
            picked.pop_back();
        }
        while (mention_tokens > len) ++len;

        int segments = static_cast<int>(picked.size()) + 1;
        std::vector<int> filler_per_segment(segments, 0);
        for (int g = 1; g < segments - 1; ++g) filler_per_segment[g] = 1;
        int rem = len - mention_tokens;
        for (int g = 1; g < segments - 1; ++g) rem -= 1;
        for (int r = 0; r < rem; ++r) {
            filler_per_segment[rng.index(segments)] += 1;
        }

        LabeledSentence s;
        for (int g = 0; g < segments; ++g) {
            for (int f = 0; f < filler_per_segment[g]; ++f) {
                s.tokens.push_back(fillers[rng.index(fillers.size())]);
                s.labels.push_back(LabelSet::kOutside);
            }
            if (g < segments - 1) {
                for (const auto& w : picked[g].words) {
                    s.tokens.push_back(w);
                    s.labels.push_back(picked[g].label);
                }
            }
        }
        d.sentences.push_back(std::move(s));
    }
    return d;
}

}  // namespace promet
