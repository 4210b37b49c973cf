#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace logitmix {

// Fixed vocabulary for the arithmetic task: digits, operators, structure
// tokens and the answer template pair.
namespace vocab {

inline constexpr int kPlus = 10;
inline constexpr int kMinus = 11;
inline constexpr int kTimes = 12;
inline constexpr int kEquals = 13;
inline constexpr int kQuery = 14;
inline constexpr int kAnsOpen = 15;
inline constexpr int kAnsClose = 16;
inline constexpr int kBos = 17;
inline constexpr int kEos = 18;
inline constexpr int kPad = 19;
inline constexpr int kSize = 20;

inline constexpr int digit_id(int d) { return d; }
inline constexpr bool is_digit_id(int id) { return id >= 0 && id <= 9; }

int op_token(char op);
std::string token_name(int id);
int token_from_name(const std::string& name);
std::string decode(std::span<const int> tokens);
std::vector<int> encode(const std::string& text);

// Decimal digits, most significant first. value must be nonnegative.
std::vector<int> digit_tokens(long value);

}  // namespace vocab

struct Difficulty {
    int min_operand = 0;
    int max_operand = 49;
    std::string ops = "+-";  // subset of "+-*"

    void validate() const;
};

enum class Split { Train, Val, Test, All };
const char* split_name(Split s);
Split split_from_name(const std::string& name);

struct Problem {
    std::vector<int> prompt;  // BOS lhs-digits op rhs-digits '=' '?'
    long gold = 0;
    int lhs = 0;
    int rhs = 0;
    char op = '+';

    // Stable identity of the operand tuple; the split hash and the eval
    // problem-set fingerprint both key on this.
    std::uint64_t key() const;
};

Problem make_problem(int lhs, char op, int rhs);

// Hash-partitioned on the operand tuple so splits are disjoint for every
// seed: 80% train, 10% val, 10% test.
Split split_of(int lhs, char op, int rhs);

// Deterministic in seed. distinct=true draws without replacement from the
// split's tuple pool (config error if the pool is smaller than count).
std::vector<Problem> generate_problems(std::uint64_t seed, int count,
                                       const Difficulty& difficulty, Split split,
                                       bool distinct = false);

struct Verdict {
    bool format_ok = false;
    bool answer_ok = false;
    int reward = 0;
};

// Total on arbitrary token sequences: format_ok iff the prefix before the
// first EOS contains exactly one ANS_OPEN..ANS_CLOSE span; answer_ok iff the
// enclosed tokens are all digits and parse to the gold answer.
Verdict verify(const Problem& problem, std::span<const int> response);

struct DemoPair {
    Problem problem;
    std::vector<int> response;
    bool corrupted = false;
};

struct DemoCorpus {
    std::vector<DemoPair> items;
    double corruption_rate = 0.0;
};

// Every demonstration is format-perfect; round(count * corruption_rate) of
// them carry a perturbed answer digit.
DemoCorpus build_demo_corpus(std::uint64_t seed, int count, double corruption_rate,
                             const Difficulty& difficulty, Split split = Split::Train);

// Drops the ANS_OPEN/ANS_CLOSE pair from every demonstration (bare answer
// followed by EOS), for training a template-blind base policy.
DemoCorpus strip_answer_templates(const DemoCorpus& corpus);

// Line-oriented text formats for inspection and re-use across runs.
void save_problems(const std::vector<Problem>& problems, const std::string& path);
std::vector<Problem> load_problems(const std::string& path);
void save_corpus(const DemoCorpus& corpus, const std::string& path);
DemoCorpus load_corpus(const std::string& path);

}  // namespace logitmix
