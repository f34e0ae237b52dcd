#pragma once

#include <string>
#include <vector>

namespace promet {

using LabelId = int;

// Ordered label inventory for a dataset. Index 0 is always the non-entity
// label "O"; entity labels follow in first-occurrence order. Each entity
// label carries a lowercase plain-text annotation ("LOC" -> "location")
// used by the prompt builders; the default annotation is derived from the
// label name and can be overridden from an annotation file.
struct LabelSet {
    static constexpr LabelId kOutside = 0;

    std::vector<std::string> names;        // names[0] == "O"
    std::vector<std::string> annotations;  // annotations[0] == "other"

    int size() const { return static_cast<int>(names.size()); }
    bool contains(LabelId id) const { return id >= 0 && id < size(); }

    // Index of a label name, or -1.
    LabelId find(const std::string& name) const;

    bool operator==(const LabelSet&) const = default;
};

// Builds a label set from entity label names (O is implicit and prepended).
// Annotations default to the lowercased name with '_'/'-' turned into spaces.
LabelSet make_label_set(const std::vector<std::string>& entity_names);

std::string default_annotation(const std::string& label_name);

// Annotation of a label, tokenized on spaces. O yields {"other"}.
std::vector<std::string> annotation_text(const LabelSet& ls, LabelId id);

// Word tokens with one IO label per token.
struct LabeledSentence {
    std::vector<std::string> tokens;
    std::vector<LabelId> labels;

    bool operator==(const LabeledSentence&) const = default;
};

struct Dataset {
    std::vector<LabeledSentence> sentences;
    LabelSet label_set;

    bool operator==(const Dataset&) const = default;
};

// Parses CoNLL column text: one token per non-blank line, whitespace-separated
// columns, blank line between sentences, "-DOCSTART-" lines skipped. The label
// is taken from `label_column` (0-based; -1 means last column). BIO prefixes
// are collapsed to IO by stripping "B-"/"I-".
Dataset parse_conll(const std::string& text, int label_column = -1);

// Inverse of parse_conll for round-tripping: token<TAB>label lines.
std::string to_conll(const Dataset& d);

// Applies "LABEL<TAB>plain text annotation" override lines. Labels absent
// from the set are ignored (a dictionary may span several datasets); O is
// pinned to "other" and cannot be overridden.
void apply_annotation_file(LabelSet& ls, const std::string& text);

// Replaces every entity label not in `keep` by O and drops it from the label
// set. O is always kept; kept labels retain their original relative order.
Dataset mask_labels(const Dataset& d, const std::vector<LabelId>& keep);

}  // namespace promet
