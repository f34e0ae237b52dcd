#pragma once

#include <string>
#include <vector>

#include "promet/corpus.hpp"

namespace promet {

// A token sequence produced by a prompt builder, plus the binary mask that
// recovers the original sentence: mask is 1 exactly at the positions holding
// the original tokens, in their original order.
struct PromptedSequence {
    std::vector<std::string> tokens;
    std::vector<int> mask;

    bool operator==(const PromptedSequence&) const = default;
};

// Canonical option list for a set of target entity labels: "other" first,
// then the targets' annotations in lexicographic order of their text.
std::vector<std::vector<std::string>> option_annotations(const LabelSet& ls,
                                                         const std::vector<LabelId>& targets);

// Prefixes the sentence with the comma-separated options and a colon.
// Prefix and separator positions get mask 0, sentence positions mask 1.
PromptedSequence option_prefix(const std::vector<std::string>& x,
                               const std::vector<std::vector<std::string>>& options);

// Wraps each entity mention (maximal run of one non-O label) in
// "[" mention "|" annotation "]". Inserted tokens get mask 0.
PromptedSequence label_aware(const std::vector<std::string>& x, const std::vector<LabelId>& y,
                             const LabelSet& ls);

// The sentence unchanged, mask all ones.
PromptedSequence identity_prompt(const std::vector<std::string>& x);

// Tokens at mask-1 positions, in order.
std::vector<std::string> reduce(const PromptedSequence& p);

}  // namespace promet
