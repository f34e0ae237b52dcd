#include "promet/prompting.hpp"

#include <algorithm>

#include "promet/errors.hpp"

namespace promet {

std::vector<std::vector<std::string>> option_annotations(const LabelSet& ls,
                                                         const std::vector<LabelId>& targets) {
    std::vector<std::string> joined;
    for (LabelId id : targets) {
        if (!ls.contains(id)) throw DataError("option_annotations: unknown label id " + std::to_string(id));
        if (id == LabelSet::kOutside) continue;
        joined.push_back(ls.annotations[id]);
    }
    std::sort(joined.begin(), joined.end());
    joined.erase(std::unique(joined.begin(), joined.end()), joined.end());

    std::vector<std::vector<std::string>> options;
    options.push_back({"other"});
    for (const auto& ann : joined) {
        std::vector<std::string> words;
        std::size_t i = 0;
        while (i < ann.size()) {
            std::size_t j = ann.find(' ', i);
            if (j == std::string::npos) j = ann.size();
            if (j > i) words.push_back(ann.substr(i, j - i));
            i = j + 1;
        }
        options.push_back(std::move(words));
    }
    return options;
}

PromptedSequence option_prefix(const std::vector<std::string>& x,
                               const std::vector<std::vector<std::string>>& options) {
    if (x.empty()) throw DataError("option_prefix: empty sentence");
    if (options.empty()) throw DataError("option_prefix: empty option list");
    PromptedSequence p;
    for (std::size_t i = 0; i < options.size(); ++i) {
        if (options[i].empty()) throw DataError("option_prefix: empty annotation in option list");
        if (i) {
            p.tokens.push_back(",");
            p.mask.push_back(0);
        }
        for (const auto& w : options[i]) {
            p.tokens.push_back(w);
            p.mask.push_back(0);
        }
    }
    p.tokens.push_back(":");
    p.mask.push_back(0);
    for (const auto& w : x) {
        p.tokens.push_back(w);
        p.mask.push_back(1);
    }
    return p;
}

PromptedSequence label_aware(const std::vector<std::string>& x, const std::vector<LabelId>& y,
                             const LabelSet& ls) {
    if (x.empty()) throw DataError("label_aware: empty sentence");
    if (x.size() != y.size()) throw DataError("label_aware: token/label length mismatch");
    PromptedSequence p;
    std::size_t i = 0;
    while (i < x.size()) {
        if (y[i] == LabelSet::kOutside) {
            p.tokens.push_back(x[i]);
            p.mask.push_back(1);
            ++i;
            continue;
        }
        LabelId lab = y[i];
        std::size_t j = i;
        while (j < x.size() && y[j] == lab) ++j;
        p.tokens.push_back("[");
        p.mask.push_back(0);
        for (std::size_t k = i; k < j; ++k) {
            p.tokens.push_back(x[k]);
            p.mask.push_back(1);
        }
        p.tokens.push_back("|");
        p.mask.push_back(0);
        for (const auto& w : annotation_text(ls, lab)) {
            p.tokens.push_back(w);
            p.mask.push_back(0);
        }
        p.tokens.push_back("]");
        p.mask.push_back(0);
        i = j;
    }
    return p;
}

PromptedSequence identity_prompt(const std::vector<std::string>& x) {
    if (x.empty()) throw DataError("identity_prompt: empty sentence");
    PromptedSequence p;
    p.tokens = x;
    p.mask.assign(x.size(), 1);
    return p;
}

std::vector<std::string> reduce(const PromptedSequence& p) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < p.tokens.size(); ++i) {
        if (p.mask[i]) out.push_back(p.tokens[i]);
    }
    return out;
}

}  // namespace promet
