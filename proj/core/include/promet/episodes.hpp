#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "promet/corpus.hpp"
#include "promet/rng.hpp"

namespace promet {

struct Episode {
    std::vector<LabeledSentence> support;
    std::vector<LabeledSentence> query;
    std::vector<LabelId> target_labels;
    std::uint64_t seed = 0;

    bool operator==(const Episode&) const = default;
};

struct SamplerConfig {
    int way = 5;
    int shot = 1;
    int query_shot = 1;
    std::uint64_t seed = 0;
};

// Number of entity mentions of each label in the sentence. A mention is a
// maximal run of contiguous tokens sharing one non-O label.
std::vector<int> mention_counts(const LabeledSentence& s, int label_count);

// Greedy downsampling: shuffle the candidate sentences (those whose entity
// labels all fall inside targets), then add a sentence when some target is
// still below k and adding keeps every target at or below 2k. A reverse
// insertion-order pruning pass then drops every sentence whose removal keeps
// all targets at or above k. Throws DataError naming a deficient label when
// the candidates cannot cover every target k times.
std::vector<LabeledSentence> sample_entity_set(const Dataset& d,
                                               const std::vector<LabelId>& targets, int k,
                                               Rng& rng);

// Picks `way` target labels uniformly from d's entity labels, samples the
// support with `shot`, then the query with `query_shot` over the remaining
// sentences. Support and query never share a sentence instance.
Episode sample_episode(const Dataset& d, const SamplerConfig& cfg, Rng& rng);

// One episode per seed cfg.seed + i, recorded in Episode::seed.
std::vector<Episode> sample_episodes(const Dataset& d, const SamplerConfig& cfg, int count);

// Support by the same greedy procedure over the full entity label set of
// d_test; query is every remaining sentence.
std::pair<std::vector<LabeledSentence>, std::vector<LabeledSentence>> sample_low_resource(
    const Dataset& d_test, int k, Rng& rng);

// True when every target mention count lies in [k, 2k], no out-of-target
// entity label appears, and no sentence can be removed without dropping a
// target below k.
bool entity_set_valid(const std::vector<LabeledSentence>& sentences, int label_count,
                      const std::vector<LabelId>& targets, int k);

// One JSON object per line; labels serialized by name. When valid is given
// it must parallel episodes and is written per record.
std::string episodes_to_jsonl(const std::vector<Episode>& episodes, const LabelSet& ls,
                              const std::vector<bool>* valid = nullptr);
std::vector<Episode> episodes_from_jsonl(const std::string& text, const LabelSet& ls);

}  // namespace promet
