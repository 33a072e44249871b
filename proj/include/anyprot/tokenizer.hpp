#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "anyprot/common.hpp"
#include "anyprot/ini.hpp"

namespace anyprot {

enum class Modality { Sequence, Structure, Description };

enum class TaskKind {
    SeqToDesc,
    StructToDesc,
    DescToSeq,
    StructToSeq,
    SeqToStruct,
    DescToStruct,
    Dialogue,
};

inline constexpr int kNumProteinTasks = 6;
inline constexpr std::array<TaskKind, 6> kProteinTasks = {
    TaskKind::SeqToDesc,  TaskKind::StructToDesc, TaskKind::DescToSeq,
    TaskKind::StructToSeq, TaskKind::SeqToStruct,  TaskKind::DescToStruct,
};

Modality task_condition(TaskKind k);
Modality task_target(TaskKind k);
const char* task_name(TaskKind k);          // e.g. "seq-to-desc"
TaskKind task_from_name(const std::string& name);
const char* modality_name(Modality m);

inline constexpr char kResidueAlphabet[] = "ACDEFGHIKLMNPQRSTVWY";

// Fixed toy vocabulary: reserved specials, punctuation, the 20 residue
// letters, per-character fallback tokens for out-of-lexicon words, name-code
// words, and a closed text lexicon. Ids are dense and stable.
class Vocab {
  public:
    static Vocab build_default();
    static Vocab load_json(const std::string& path);
    void save_json(const std::string& path) const;

    int size() const { return static_cast<int>(tokens_.size()); }
    int id(const std::string& token) const;  // InputError when unknown
    bool contains(const std::string& token) const { return by_token_.count(token) != 0; }
    const std::string& token(int id) const;

    // reserved ids, never produced by text segmentation
    int pad() const { return 0; }
    int bos() const { return 1; }
    int eos() const { return 2; }
    int num() const { return 3; }
    int seq_cond() const { return 4; }
    int struct_cond() const { return 5; }
    int close_word() const { return 6; }

    bool is_residue(int id) const;
    char residue_char(int id) const;  // InputError when not a residue token

    // lowercase, space out punctuation {. , : ; ?}, drop characters outside
    // [a-z0-9-] and punctuation, collapse whitespace
    static std::string normalize(const std::string& s);

    // word-level over the lexicon; unknown words become per-character
    // fallback tokens closed by [CW]; detokenize(tokenize(s)) == normalize(s)
    std::vector<int> tokenize_text(const std::string& s) const;
    std::string detokenize(const std::vector<int>& ids) const;

    std::vector<int> tokenize_sequence(const std::string& aa) const;  // InputError on bad letter
    std::string sequence_from_ids(const std::vector<int>& ids) const;  // residues until [EOS]

  private:
    std::vector<std::string> tokens_;
    std::map<std::string, int> by_token_;
    void push(const std::string& t);
};

// Per-task system/user message templates, data not code.
struct PromptTemplates {
    std::map<std::string, std::pair<std::string, std::string>> by_task;  // name -> {system, user}

    static PromptTemplates builtin_default();
    static PromptTemplates from_ini(const Ini& ini);
    void save_ini(const std::string& path) const;
    const std::pair<std::string, std::string>& lookup(TaskKind k) const;
};

// Target-side payload of one instance (training / scoring).
struct ResponsePayload {
    Modality target = Modality::Description;
    std::string text;                                  // description target
    std::string sequence;                              // residue target
    std::vector<std::array<double, 6>> angles;         // structure target rows
    std::vector<std::array<bool, 6>> angle_mask;       // validity per component
};

struct Prompt {
    TaskKind kind = TaskKind::Dialogue;
    std::vector<int> system_ids;     // begins with [BOS]
    std::vector<int> condition_ids;  // text ids, or n_abs sentinel copies when abstracted
    bool abstracted = false;
    std::vector<int> user_ids;
    std::vector<int> response_ids;                      // ends with [EOS]; empty at inference
    std::vector<std::array<double, 6>> response_angles;  // one row per [NUM] in response_ids
    std::vector<std::array<bool, 6>> response_angle_mask;

    int response_start() const {  // Eq. 2's j
        return static_cast<int>(system_ids.size() + condition_ids.size() + user_ids.size());
    }
    std::vector<int> full_ids() const;
    int total_tokens() const;
};

// condition_text is consumed only when the condition is textual (description
// conditions and the dialogue question); sequence/structure conditions become
// n_abs sentinel positions whose embeddings the abstractor later replaces.
Prompt assemble_prompt(const Vocab& vocab, const PromptTemplates& templates, TaskKind kind,
                       const std::string& condition_text, int n_abs,
                       const ResponsePayload* response);

}  // namespace anyprot
