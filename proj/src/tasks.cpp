#include "logitmix/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "logitmix/errors.hpp"
#include "logitmix/rng.hpp"

namespace logitmix {

namespace vocab {

int op_token(char op) {
    switch (op) {
        case '+': return kPlus;
        case '-': return kMinus;
        case '*': return kTimes;
    }
    throw ConfigError(std::string("unknown operator: ") + op);
}

std::string token_name(int id) {
    if (is_digit_id(id)) return std::string(1, static_cast<char>('0' + id));
    switch (id) {
        case kPlus: return "+";
        case kMinus: return "-";
        case kTimes: return "*";
        case kEquals: return "=";
        case kQuery: return "?";
        case kAnsOpen: return "<ans>";
        case kAnsClose: return "</ans>";
        case kBos: return "<bos>";
        case kEos: return "<eos>";
        case kPad: return "<pad>";
    }
    throw InputError("token id out of range: " + std::to_string(id));
}

int token_from_name(const std::string& name) {
    if (name.size() == 1 && name[0] >= '0' && name[0] <= '9') return name[0] - '0';
    if (name == "+") return kPlus;
    if (name == "-") return kMinus;
    if (name == "*") return kTimes;
    if (name == "=") return kEquals;
    if (name == "?") return kQuery;
    if (name == "<ans>") return kAnsOpen;
    if (name == "</ans>") return kAnsClose;
    if (name == "<bos>") return kBos;
    if (name == "<eos>") return kEos;
    if (name == "<pad>") return kPad;
    throw InputError("unknown token name: " + name);
}

std::string decode(std::span<const int> tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out += ' ';
        out += token_name(tokens[i]);
    }
    return out;
}

std::vector<int> encode(const std::string& text) {
    std::vector<int> out;
    std::istringstream ss(text);
    std::string word;
    while (ss >> word) out.push_back(token_from_name(word));
    return out;
}

std::vector<int> digit_tokens(long value) {
    if (value < 0) throw InputError("digit_tokens: negative value");
    std::string s = std::to_string(value);
    std::vector<int> out;
    out.reserve(s.size());
    for (char c : s) out.push_back(c - '0');
    return out;
}

}  // namespace vocab

void Difficulty::validate() const {
    if (min_operand < 0 || max_operand < min_operand) {
        throw ConfigError("task: operand range is empty or negative");
    }
    if (ops.empty()) throw ConfigError("task: no operators configured");
    for (char op : ops) {
        if (op != '+' && op != '-' && op != '*') {
            throw ConfigError(std::string("task: unknown operator '") + op + "'");
        }
    }
}

const char* split_name(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
        case Split::All: return "all";
    }
    return "?";
}

Split split_from_name(const std::string& name) {
    if (name == "train") return Split::Train;
    if (name == "val") return Split::Val;
    if (name == "test") return Split::Test;
    if (name == "all") return Split::All;
    throw ConfigError("unknown split: " + name);
}

std::uint64_t Problem::key() const {
    return (static_cast<std::uint64_t>(lhs) << 24) |
           (static_cast<std::uint64_t>(static_cast<unsigned char>(op)) << 16) |
           static_cast<std::uint64_t>(rhs);
}

Problem make_problem(int lhs, char op, int rhs) {
    Problem p;
    p.lhs = lhs;
    p.rhs = rhs;
    p.op = op;
    switch (op) {
        case '+': p.gold = static_cast<long>(lhs) + rhs; break;
        case '-':
            if (lhs < rhs) throw InputError("make_problem: subtraction would be negative");
            p.gold = static_cast<long>(lhs) - rhs;
            break;
        case '*': p.gold = static_cast<long>(lhs) * rhs; break;
        default: throw ConfigError(std::string("unknown operator: ") + op);
    }
    p.prompt.push_back(vocab::kBos);
    for (int t : vocab::digit_tokens(lhs)) p.prompt.push_back(t);
    p.prompt.push_back(vocab::op_token(op));
    for (int t : vocab::digit_tokens(rhs)) p.prompt.push_back(t);
    p.prompt.push_back(vocab::kEquals);
    p.prompt.push_back(vocab::kQuery);
    return p;
}

Split split_of(int lhs, char op, int rhs) {
    std::uint64_t state = (static_cast<std::uint64_t>(lhs) << 24) |
                          (static_cast<std::uint64_t>(static_cast<unsigned char>(op)) << 16) |
                          static_cast<std::uint64_t>(rhs);
    const std::uint64_t h = splitmix64(state);
    const std::uint64_t bucket = h % 10;
    if (bucket < 8) return Split::Train;
    if (bucket == 8) return Split::Val;
    return Split::Test;
}

namespace {

// Operand tuples are canonicalized so subtraction never goes negative.
struct Tuple {
    int lhs;
    char op;
    int rhs;
};

Tuple sample_tuple(const Difficulty& d, Rng& rng) {
    const std::uint64_t span = static_cast<std::uint64_t>(d.max_operand - d.min_operand) + 1;
    int lhs = d.min_operand + static_cast<int>(rng.bounded(span));
    int rhs = d.min_operand + static_cast<int>(rng.bounded(span));
    const char op = d.ops[rng.bounded(d.ops.size())];
    if (op == '-' && lhs < rhs) std::swap(lhs, rhs);
    return {lhs, op, rhs};
}

std::vector<Tuple> split_pool(const Difficulty& d, Split split) {
    std::vector<Tuple> pool;
    for (char op : d.ops) {
        for (int lhs = d.min_operand; lhs <= d.max_operand; ++lhs) {
            for (int rhs = d.min_operand; rhs <= d.max_operand; ++rhs) {
                if (op == '-' && lhs < rhs) continue;
                if (split == Split::All || split_of(lhs, op, rhs) == split) {
                    pool.push_back({lhs, op, rhs});
                }
            }
        }
    }
    return pool;
}

}  // namespace

std::vector<Problem> generate_problems(std::uint64_t seed, int count,
                                       const Difficulty& difficulty, Split split,
                                       bool distinct) {
    difficulty.validate();
    if (count < 1) throw ConfigError("generate_problems: count must be positive");
    Rng rng(derive_seed(seed, 0x70726f62ULL, static_cast<std::uint64_t>(split)));
    std::vector<Problem> out;
    out.reserve(static_cast<std::size_t>(count));
    if (distinct) {
        std::vector<Tuple> pool = split_pool(difficulty, split);
        if (static_cast<int>(pool.size()) < count) {
            throw ConfigError("generate_problems: split pool has only " +
                              std::to_string(pool.size()) + " distinct problems, need " +
                              std::to_string(count));
        }
        rng.shuffle(pool);
        for (int i = 0; i < count; ++i) out.push_back(make_problem(pool[static_cast<std::size_t>(i)].lhs, pool[static_cast<std::size_t>(i)].op, pool[static_cast<std::size_t>(i)].rhs));
        return out;
    }
    while (static_cast<int>(out.size()) < count) {
        const Tuple t = sample_tuple(difficulty, rng);
        if (split != Split::All && split_of(t.lhs, t.op, t.rhs) != split) continue;
        out.push_back(make_problem(t.lhs, t.op, t.rhs));
    }
    return out;
}

Verdict verify(const Problem& problem, std::span<const int> response) {
    Verdict v;
    // consider only the prefix before the first EOS (or the whole response)
    std::size_t end = response.size();
    for (std::size_t i = 0; i < response.size(); ++i) {
        if (response[i] == vocab::kEos) {
            end = i;
            break;
        }
    }
    int opens = 0;
    int closes = 0;
    std::size_t open_at = 0;
    std::size_t close_at = 0;
    for (std::size_t i = 0; i < end; ++i) {
        if (response[i] == vocab::kAnsOpen) {
            ++opens;
            open_at = i;
        } else if (response[i] == vocab::kAnsClose) {
            ++closes;
            close_at = i;
        }
    }
    v.format_ok = (opens == 1 && closes == 1 && open_at < close_at);
    if (v.format_ok) {
        long value = 0;
        bool digits_ok = close_at > open_at + 1;  // nonempty span
        std::size_t span_len = close_at - open_at - 1;
        if (span_len > 12) digits_ok = false;  // overflow guard
        if (digits_ok) {
            for (std::size_t i = open_at + 1; i < close_at; ++i) {
                if (!vocab::is_digit_id(response[i])) {
                    digits_ok = false;
                    break;
                }
                value = value * 10 + response[i];
            }
        }
        v.answer_ok = digits_ok && value == problem.gold;
    }
    v.reward = (v.format_ok && v.answer_ok) ? 1 : 0;
    return v;
}

DemoCorpus build_demo_corpus(std::uint64_t seed, int count, double corruption_rate,
                             const Difficulty& difficulty, Split split) {
    if (corruption_rate < 0.0 || corruption_rate > 1.0) {
        throw ConfigError("corpus: corruption_rate must be in [0,1]");
    }
    if (count < 1) throw ConfigError("corpus: count must be positive");
    DemoCorpus corpus;
    corpus.corruption_rate = corruption_rate;
    std::vector<Problem> problems =
        generate_problems(derive_seed(seed, 0x636f7270ULL), count, difficulty, split);

    const int corrupt_count = static_cast<int>(std::llround(corruption_rate * count));
    std::vector<int> order(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) order[static_cast<std::size_t>(i)] = i;
    Rng rng(derive_seed(seed, 0x636f727275707401ULL));
    rng.shuffle(order);
    std::vector<bool> corrupt(static_cast<std::size_t>(count), false);
    for (int i = 0; i < corrupt_count; ++i) corrupt[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = true;

    for (int i = 0; i < count; ++i) {
        DemoPair pair;
        pair.problem = std::move(problems[static_cast<std::size_t>(i)]);
        pair.corrupted = corrupt[static_cast<std::size_t>(i)];
        std::vector<int> digits = vocab::digit_tokens(pair.problem.gold);
        if (pair.corrupted) {
            const std::size_t pos = rng.bounded(digits.size());
            const int old = digits[pos];
            digits[pos] = static_cast<int>((old + 1 + rng.bounded(9)) % 10);
        }
        pair.response.push_back(vocab::kAnsOpen);
        pair.response.insert(pair.response.end(), digits.begin(), digits.end());
        pair.response.push_back(vocab::kAnsClose);
        pair.response.push_back(vocab::kEos);
        corpus.items.push_back(std::move(pair));
    }
    return corpus;
}

DemoCorpus strip_answer_templates(const DemoCorpus& corpus) {
    DemoCorpus out;
    out.corruption_rate = corpus.corruption_rate;
    out.items.reserve(corpus.items.size());
    for (const DemoPair& pair : corpus.items) {
        DemoPair stripped;
        stripped.problem = pair.problem;
        stripped.corrupted = pair.corrupted;
        for (int t : pair.response) {
            if (t == vocab::kAnsOpen || t == vocab::kAnsClose) continue;
            stripped.response.push_back(t);
        }
        out.items.push_back(std::move(stripped));
    }
    return out;
}

void save_problems(const std::vector<Problem>& problems, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InputError("save_problems: cannot open " + path);
    for (const Problem& p : problems) {
        out << vocab::decode(p.prompt) << " | " << p.gold << "\n";
    }
}

namespace {

Problem parse_problem_line(const std::string& spec) {
    const auto bar = spec.find(" | ");
    if (bar == std::string::npos) throw InputError("problem line missing ' | ': " + spec);
    std::vector<int> prompt = vocab::encode(spec.substr(0, bar));
    // prompt: BOS digits op digits '=' '?'
    if (prompt.size() < 6 || prompt.front() != vocab::kBos) {
        throw InputError("malformed problem prompt: " + spec);
    }
    std::size_t i = 1;
    int lhs = 0;
    while (i < prompt.size() && vocab::is_digit_id(prompt[i])) lhs = lhs * 10 + prompt[i++];
    if (i >= prompt.size()) throw InputError("malformed problem prompt: " + spec);
    char op;
    if (prompt[i] == vocab::kPlus) op = '+';
    else if (prompt[i] == vocab::kMinus) op = '-';
    else if (prompt[i] == vocab::kTimes) op = '*';
    else throw InputError("malformed problem prompt: " + spec);
    ++i;
    int rhs = 0;
    while (i < prompt.size() && vocab::is_digit_id(prompt[i])) rhs = rhs * 10 + prompt[i++];
    Problem p = make_problem(lhs, op, rhs);
    const long gold = std::stol(spec.substr(bar + 3));
    if (gold != p.gold) throw InputError("gold answer mismatch in line: " + spec);
    return p;
}

}  // namespace

std::vector<Problem> load_problems(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("load_problems: cannot open " + path);
    std::vector<Problem> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        out.push_back(parse_problem_line(line));
    }
    return out;
}

void save_corpus(const DemoCorpus& corpus, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InputError("save_corpus: cannot open " + path);
    out << "corruption_rate " << corpus.corruption_rate << "\n";
    for (const DemoPair& pair : corpus.items) {
        out << vocab::decode(pair.problem.prompt) << " | " << pair.problem.gold << " | "
            << vocab::decode(pair.response) << " | " << (pair.corrupted ? 1 : 0) << "\n";
    }
}

DemoCorpus load_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("load_corpus: cannot open " + path);
    DemoCorpus corpus;
    std::string line;
    if (!std::getline(in, line)) throw InputError("load_corpus: empty file " + path);
    {
        std::istringstream ss(line);
        std::string key;
        ss >> key >> corpus.corruption_rate;
        if (key != "corruption_rate") throw InputError("load_corpus: bad header in " + path);
    }
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        // prompt | gold | response | corrupted
        std::vector<std::string> parts;
        std::size_t start = 0;
        for (;;) {
            const auto bar = line.find(" | ", start);
            if (bar == std::string::npos) {
                parts.push_back(line.substr(start));
                break;
            }
            parts.push_back(line.substr(start, bar - start));
            start = bar + 3;
        }
        if (parts.size() != 4) throw InputError("load_corpus: malformed line: " + line);
        DemoPair pair;
        pair.problem = parse_problem_line(parts[0] + " | " + parts[1]);
        pair.response = vocab::encode(parts[2]);
        pair.corrupted = parts[3] == "1";
        corpus.items.push_back(std::move(pair));
    }
    return corpus;
}

}  // namespace logitmix
