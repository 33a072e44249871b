#include "anyprot/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace anyprot {

Modality task_condition(TaskKind k) {
    switch (k) {
        case TaskKind::SeqToDesc: return Modality::Sequence;
        case TaskKind::StructToDesc: return Modality::Structure;
        case TaskKind::DescToSeq: return Modality::Description;
        case TaskKind::StructToSeq: return Modality::Structure;
        case TaskKind::SeqToStruct: return Modality::Sequence;
        case TaskKind::DescToStruct: return Modality::Description;
        case TaskKind::Dialogue: return Modality::Description;
    }
    throw InputError("unknown task kind");
}

Modality task_target(TaskKind k) {
    switch (k) {
        case TaskKind::SeqToDesc: return Modality::Description;
        case TaskKind::StructToDesc: return Modality::Description;
        case TaskKind::DescToSeq: return Modality::Sequence;
        case TaskKind::StructToSeq: return Modality::Sequence;
        case TaskKind::SeqToStruct: return Modality::Structure;
        case TaskKind::DescToStruct: return Modality::Structure;
        case TaskKind::Dialogue: return Modality::Description;
    }
    throw InputError("unknown task kind");
}

const char* task_name(TaskKind k) {
    switch (k) {
        case TaskKind::SeqToDesc: return "seq-to-desc";
        case TaskKind::StructToDesc: return "struct-to-desc";
        case TaskKind::DescToSeq: return "desc-to-seq";
        case TaskKind::StructToSeq: return "struct-to-seq";
        case TaskKind::SeqToStruct: return "seq-to-struct";
        case TaskKind::DescToStruct: return "desc-to-struct";
        case TaskKind::Dialogue: return "dialogue";
    }
    throw InputError("unknown task kind");
}

TaskKind task_from_name(const std::string& name) {
    for (TaskKind k : kProteinTasks)
        if (name == task_name(k)) return k;
    if (name == "dialogue") return TaskKind::Dialogue;
    throw InputError("unknown task name: " + name);
}

const char* modality_name(Modality m) {
    switch (m) {
        case Modality::Sequence: return "sequence";
        case Modality::Structure: return "structure";
        case Modality::Description: return "description";
    }
    throw InputError("unknown modality");
}

namespace {

// Every word the corpus generator, prompt templates, and dialogue set can
// emit. Unknown words in free-form input still round-trip via the
// per-character fallback tokens, so this list only has to cover generated
// text to keep it one-token-per-word.
const char* const kLexiconWords[] = {
    "a", "acid", "alpha", "amino", "an", "and", "angles", "are", "assistant", "atoms",
    "avoid", "backbone", "beta", "binds", "bond", "bonds", "can", "carbon", "carbonyl",
    "cell", "cleaves", "coiled", "contacts", "contributes", "coordinate", "cytoplasm",
    "describe", "do", "does", "each", "ester", "extended", "family", "file", "form",
    "formats", "function", "generate", "go", "groups", "helicase", "helix", "helixin",
    "hello", "help", "how", "hydrolase", "hydrolin", "hydrolyzes", "hydrophobic", "i",
    "ions", "is", "isoleucine", "isomerase", "isomerin", "kinase", "kinasin", "leave",
    "leucine", "ligase", "ligasin", "linked", "location", "many", "membrane", "metal",
    "modeling", "motif", "name", "nitrogen", "notable", "nothing", "nucleus", "omega",
    "one", "oxidase", "oxidin", "oxygen", "paired", "pattern", "peptide", "phi",
    "phosphate", "plain", "predict", "protein", "proteins", "protons", "psi", "pumps",
    "read", "records", "redox", "reductase", "reductin", "regular", "residue",
    "residues", "secreted", "senses", "sequence", "sequences", "sheet", "short",
    "simple", "six", "stabilizes", "state", "strands", "structure", "structures",
    "text", "thanks", "the", "three", "to", "today", "transferase", "transferin",
    "transfers", "turns", "valine", "water", "welcome", "what", "where", "which",
    "with", "you",
};

const char kPunct[] = {'.', ',', ':', ';', '?'};

bool is_kept_char(char c) {
    if (c >= 'a' && c <= 'z') return true;
    if (c >= '0' && c <= '9') return true;
    if (c == '-') return true;
    return false;
}

bool is_punct_char(char c) {
    for (char p : kPunct)
        if (c == p) return true;
    return false;
}

}  // namespace

void Vocab::push(const std::string& t) {
    if (by_token_.count(t)) throw InputError("duplicate vocabulary token: " + t);
    by_token_[t] = static_cast<int>(tokens_.size());
    tokens_.push_back(t);
}

Vocab Vocab::build_default() {
    Vocab v;
    for (const char* s : {"[PAD]", "[BOS]", "[EOS]", "[NUM]", "[SEQ_COND]", "[STRUCT_COND]", "[CW]"})
        v.push(s);
    for (char p : kPunct) v.push(std::string(1, p));
    for (const char* r = kResidueAlphabet; *r; ++r) v.push(std::string(1, *r));
    for (char c = 'a'; c <= 'z'; ++c) v.push(std::string("~") + c);
    for (char c = '0'; c <= '9'; ++c) v.push(std::string("~") + c);
    v.push("~-");
    for (int i = 0; i <= 96; ++i) v.push("c" + std::to_string(i));
    for (int n = 8; n <= 64; ++n) v.push("n" + std::to_string(n));
    std::vector<std::string> words(std::begin(kLexiconWords), std::end(kLexiconWords));
    std::sort(words.begin(), words.end());
    for (const auto& w : words) v.push(w);
    return v;
}

int Vocab::id(const std::string& token) const {
    auto it = by_token_.find(token);
    if (it == by_token_.end()) throw InputError("token not in vocabulary: " + token);
    return it->second;
}

const std::string& Vocab::token(int id) const {
    if (id < 0 || id >= size()) throw InputError("token id out of range: " + std::to_string(id));
    return tokens_[static_cast<size_t>(id)];
}

bool Vocab::is_residue(int id) const {
    if (id < 0 || id >= size()) return false;
    const std::string& t = tokens_[static_cast<size_t>(id)];
    if (t.size() != 1) return false;
    for (const char* r = kResidueAlphabet; *r; ++r)
        if (*r == t[0]) return true;
    return false;
}

char Vocab::residue_char(int id) const {
    if (!is_residue(id)) throw InputError("token id " + std::to_string(id) + " is not a residue");
    return tokens_[static_cast<size_t>(id)][0];
}

std::string Vocab::normalize(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    auto emit = [&](char c) {
        if (pending_space && !out.empty()) out.push_back(' ');
        pending_space = false;
        out.push_back(c);
    };
    for (char raw : s) {
        char c = static_cast<char>(std::tolower(static_cast<unsigned char>(raw)));
        if (std::isspace(static_cast<unsigned char>(c))) {
            pending_space = true;
        } else if (is_punct_char(c)) {
            pending_space = true;
            emit(c);
            pending_space = true;
        } else if (is_kept_char(c)) {
            emit(c);
        }
        // anything else is dropped
    }
    return out;
}

std::vector<int> Vocab::tokenize_text(const std::string& s) const {
    std::vector<int> ids;
    std::istringstream words(normalize(s));
    std::string w;
    while (words >> w) {
        auto it = by_token_.find(w);
        // Residue letters are uppercase tokens, so a normalized (lowercase)
        // word can only hit punctuation, name codes, or the lexicon here.
        if (it != by_token_.end()) {
            ids.push_back(it->second);
            continue;
        }
        for (char c : w) ids.push_back(id(std::string("~") + c));
        ids.push_back(close_word());
    }
    return ids;
}

std::string Vocab::detokenize(const std::vector<int>& ids) const {
    std::string out;
    std::string run;  // characters of an in-progress fallback word
    auto emit_word = [&](const std::string& w) {
        if (w.empty()) return;
        if (!out.empty()) out.push_back(' ');
        out += w;
    };
    for (int i : ids) {
        const std::string& t = token(i);
        if (i == close_word()) {
            emit_word(run);
            run.clear();
        } else if (t.size() == 2 && t[0] == '~') {
            run.push_back(t[1]);
        } else if (i == pad() || i == bos() || i == eos() || i == num() || i == seq_cond() ||
                   i == struct_cond()) {
            continue;  // structural tokens carry no text
        } else {
            emit_word(run);
            run.clear();
            emit_word(t);
        }
    }
    emit_word(run);
    return out;
}

std::vector<int> Vocab::tokenize_sequence(const std::string& aa) const {
    std::vector<int> ids;
    ids.reserve(aa.size());
    for (size_t i = 0; i < aa.size(); ++i) {
        std::string t(1, aa[i]);
        auto it = by_token_.find(t);
        if (it == by_token_.end() || !is_residue(it->second))
            throw InputError("invalid residue '" + t + "' at position " + std::to_string(i));
        ids.push_back(it->second);
    }
    return ids;
}

std::string Vocab::sequence_from_ids(const std::vector<int>& ids) const {
    std::string out;
    for (int i : ids) {
        if (i == eos()) break;
        if (i == bos()) continue;
        out.push_back(residue_char(i));
    }
    return out;
}

void Vocab::save_json(const std::string& path) const {
    nlohmann::json j;
    j["tokens"] = tokens_;
    std::ofstream f(path);
    if (!f) throw IoError("cannot write vocabulary file: " + path);
    f << j.dump(2) << "\n";
}

Vocab Vocab::load_json(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot read vocabulary file: " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const std::exception& e) {
        throw IoError("malformed vocabulary file " + path + ": " + e.what());
    }
    if (!j.contains("tokens") || !j["tokens"].is_array())
        throw IoError("vocabulary file missing tokens array: " + path);
    Vocab v;
    for (const auto& t : j["tokens"]) v.push(t.get<std::string>());
    const char* expected[] = {"[PAD]", "[BOS]", "[EOS]", "[NUM]", "[SEQ_COND]", "[STRUCT_COND]", "[CW]"};
    for (int i = 0; i < 7; ++i)
        if (v.size() <= i || v.token(i) != expected[i])
            throw IoError("vocabulary file has wrong reserved token layout: " + path);
    return v;
}

PromptTemplates PromptTemplates::builtin_default() {
    PromptTemplates t;
    const std::string sys = "you are a protein modeling assistant .";
    t.by_task["seq-to-desc"] = {sys, "describe the protein ."};
    t.by_task["struct-to-desc"] = {sys, "describe the protein ."};
    t.by_task["desc-to-seq"] = {sys, "generate an amino acid sequence ."};
    t.by_task["struct-to-seq"] = {sys, "generate an amino acid sequence ."};
    t.by_task["seq-to-struct"] = {sys, "predict the backbone structure ."};
    t.by_task["desc-to-struct"] = {sys, "predict the backbone structure ."};
    t.by_task["dialogue"] = {sys, ""};  // the user turn is the question itself
    return t;
}

PromptTemplates PromptTemplates::from_ini(const Ini& ini) {
    PromptTemplates t = builtin_default();
    for (const auto& [section, keys] : ini.sections()) {
        (void)keys;
        task_from_name(section);  // validates the name
        auto& entry = t.by_task[section];
        if (ini.has(section, "system")) entry.first = ini.get(section, "system");
        if (ini.has(section, "user")) entry.second = ini.get(section, "user");
    }
    return t;
}

void PromptTemplates::save_ini(const std::string& path) const {
    Ini ini;
    for (const auto& [name, pair] : by_task) {
        ini.set(name, "system", pair.first);
        ini.set(name, "user", pair.second);
    }
    ini.save(path);
}

const std::pair<std::string, std::string>& PromptTemplates::lookup(TaskKind k) const {
    auto it = by_task.find(task_name(k));
    if (it == by_task.end()) throw InputError(std::string("no template for task ") + task_name(k));
    return it->second;
}

std::vector<int> Prompt::full_ids() const {
    std::vector<int> ids;
    ids.reserve(system_ids.size() + condition_ids.size() + user_ids.size() + response_ids.size());
    ids.insert(ids.end(), system_ids.begin(), system_ids.end());
    ids.insert(ids.end(), condition_ids.begin(), condition_ids.end());
    ids.insert(ids.end(), user_ids.begin(), user_ids.end());
    ids.insert(ids.end(), response_ids.begin(), response_ids.end());
    return ids;
}

int Prompt::total_tokens() const {
    return static_cast<int>(system_ids.size() + condition_ids.size() + user_ids.size() +
                            response_ids.size());
}

Prompt assemble_prompt(const Vocab& vocab, const PromptTemplates& templates, TaskKind kind,
                       const std::string& condition_text, int n_abs,
                       const ResponsePayload* response) {
    const auto& tmpl = templates.lookup(kind);
    Prompt p;
    p.kind = kind;
    p.system_ids.push_back(vocab.bos());
    for (int t : vocab.tokenize_text(tmpl.first)) p.system_ids.push_back(t);

    if (kind == TaskKind::Dialogue) {
        p.user_ids = vocab.tokenize_text(condition_text);
        if (p.user_ids.empty()) throw InputError("dialogue prompt needs a question");
    } else {
        switch (task_condition(kind)) {
            case Modality::Description:
                p.condition_ids = vocab.tokenize_text(condition_text);
                if (p.condition_ids.empty()) throw InputError("description condition is empty");
                break;
            case Modality::Sequence:
                if (n_abs <= 0) throw InputError("abstracted condition needs n_abs > 0");
                p.condition_ids.assign(static_cast<size_t>(n_abs), vocab.seq_cond());
                p.abstracted = true;
                break;
            case Modality::Structure:
                if (n_abs <= 0) throw InputError("abstracted condition needs n_abs > 0");
                p.condition_ids.assign(static_cast<size_t>(n_abs), vocab.struct_cond());
                p.abstracted = true;
                break;
        }
        p.user_ids = vocab.tokenize_text(tmpl.second);
    }

    if (response != nullptr) {
        switch (response->target) {
            case Modality::Description:
                p.response_ids = vocab.tokenize_text(response->text);
                if (p.response_ids.empty()) throw InputError("description response is empty");
                break;
            case Modality::Sequence:
                p.response_ids = vocab.tokenize_sequence(response->sequence);
                if (p.response_ids.empty()) throw InputError("sequence response is empty");
                break;
            case Modality::Structure: {
                size_t n = response->angles.size();
                if (n == 0) throw InputError("structure response has no residues");
                if (response->angle_mask.size() != n)
                    throw DimensionError("angle mask rows (" +
                                         std::to_string(response->angle_mask.size()) +
                                         ") do not match angle rows (" + std::to_string(n) + ")");
                p.response_ids.assign(n, vocab.num());
                p.response_angles = response->angles;
                p.response_angle_mask = response->angle_mask;
                break;
            }
        }
        p.response_ids.push_back(vocab.eos());
    }
    return p;
}

}  // namespace anyprot
