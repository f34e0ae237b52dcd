#include "promet/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>
#include <unordered_map>

#include "promet/errors.hpp"

namespace promet {

namespace {

std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
        if (j > i) fields.emplace_back(line.substr(i, j - i));
        i = j;
    }
    return fields;
}

std::vector<std::string> split_spaces(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string w;
    while (in >> w) out.push_back(w);
    return out;
}

std::string strip_bio_prefix(const std::string& label) {
    if (label.size() >= 2 && (label[0] == 'B' || label[0] == 'I') && label[1] == '-') {
        return label.substr(2);
    }
    return label;
}

}  // namespace

LabelId LabelSet::find(const std::string& name) const {
    for (int i = 0; i < size(); ++i) {
        if (names[i] == name) return i;
    }
    return -1;
}

std::string default_annotation(const std::string& label_name) {
    std::string out;
    out.reserve(label_name.size());
    for (char c : label_name) {
        if (c == '_' || c == '-') {
            out.push_back(' ');
        } else {
            out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        }
    }
    return out;
}

LabelSet make_label_set(const std::vector<std::string>& entity_names) {
    LabelSet ls;
    ls.names.push_back("O");
    ls.annotations.push_back("other");
    for (const auto& name : entity_names) {
        if (name == "O") throw DataError("entity label list must not contain O");
        if (ls.find(name) >= 0) throw DataError("duplicate label name: " + name);
        std::string ann = default_annotation(name);
        if (split_spaces(ann).empty()) throw DataError("label yields empty annotation: " + name);
        ls.names.push_back(name);
        ls.annotations.push_back(ann);
    }
    return ls;
}

std::vector<std::string> annotation_text(const LabelSet& ls, LabelId id) {
    if (!ls.contains(id)) {
        throw DataError("unknown label id " + std::to_string(id));
    }
    if (id == LabelSet::kOutside) return {"other"};
    return split_spaces(ls.annotations[id]);
}

Dataset parse_conll(const std::string& text, int label_column) {
    Dataset d;
    d.label_set.names.push_back("O");
    d.label_set.annotations.push_back("other");
    std::unordered_map<std::string, LabelId> id_of{{"O", 0}};

    LabeledSentence cur;
    auto flush = [&] {
        if (!cur.tokens.empty()) d.sentences.push_back(std::move(cur));
        cur = {};
    };

    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        auto fields = split_ws(line);
        if (fields.empty()) {
            flush();
            continue;
        }
        if (fields[0] == "-DOCSTART-") continue;

        std::string raw_label;
        if (label_column < 0) {
            if (fields.size() < 2) {
                throw ParseError("line " + std::to_string(line_no) + ": token without label column");
            }
            raw_label = fields.back();
        } else {
            if (label_column == 0 || static_cast<std::size_t>(label_column) >= fields.size()) {
                throw ParseError("line " + std::to_string(line_no) + ": token without label column " +
                                 std::to_string(label_column));
            }
            raw_label = fields[label_column];
        }
        std::string label = strip_bio_prefix(raw_label);
        if (label.empty()) {
            throw ParseError("line " + std::to_string(line_no) + ": empty label after BIO prefix: " + raw_label);
        }

        auto it = id_of.find(label);
        LabelId id;
        if (it == id_of.end()) {
            id = d.label_set.size();
            d.label_set.names.push_back(label);
            d.label_set.annotations.push_back(default_annotation(label));
            id_of.emplace(label, id);
        } else {
            id = it->second;
        }
        cur.tokens.push_back(fields[0]);
        cur.labels.push_back(id);
    }
    flush();
    return d;
}

std::string to_conll(const Dataset& d) {
    std::string out;
    for (const auto& s : d.sentences) {
        for (std::size_t i = 0; i < s.tokens.size(); ++i) {
            out += s.tokens[i];
            out += '\t';
            out += d.label_set.names[s.labels[i]];
            out += '\n';
        }
        out += '\n';
    }
    return out;
}

void apply_annotation_file(LabelSet& ls, const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw ParseError("annotation line " + std::to_string(line_no) + ": expected LABEL<TAB>text");
        }
        std::string name = line.substr(0, tab);
        std::string ann;
        for (char c : line.substr(tab + 1)) {
            ann.push_back(c == '\t' ? ' ' : static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        }
        auto words = split_spaces(ann);
        if (words.empty()) {
            throw ParseError("annotation line " + std::to_string(line_no) + ": empty annotation for " + name);
        }
        std::string joined;
        for (std::size_t i = 0; i < words.size(); ++i) {
            if (i) joined += ' ';
            joined += words[i];
        }
        LabelId id = ls.find(name);
        if (id <= LabelSet::kOutside) continue;  // unknown label or O: leave as is
        ls.annotations[id] = joined;
    }
}

Dataset mask_labels(const Dataset& d, const std::vector<LabelId>& keep) {
    std::set<LabelId> keep_set;
    for (LabelId id : keep) {
        if (!d.label_set.contains(id)) {
            throw DataError("mask_labels: unknown label id " + std::to_string(id));
        }
        if (id != LabelSet::kOutside) keep_set.insert(id);
    }

    Dataset out;
    out.label_set.names.push_back("O");
    out.label_set.annotations.push_back("other");
    std::vector<LabelId> remap(d.label_set.size(), LabelSet::kOutside);
    for (LabelId id = 1; id < d.label_set.size(); ++id) {
        if (keep_set.count(id)) {
            remap[id] = out.label_set.size();
            out.label_set.names.push_back(d.label_set.names[id]);
            out.label_set.annotations.push_back(d.label_set.annotations[id]);
        }
    }
    out.sentences.reserve(d.sentences.size());
    for (const auto& s : d.sentences) {
        LabeledSentence m;
        m.tokens = s.tokens;
        m.labels.reserve(s.labels.size());
        for (LabelId id : s.labels) m.labels.push_back(remap[id]);
        out.sentences.push_back(std::move(m));
    }
    return out;
}

}  // namespace promet
