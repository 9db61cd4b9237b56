// Copyright 2026 The gpa Authors
// SPDX-License-Identifier: Apache-2.0

#include "gpa/token_space.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <variant>

#include "gpa/error.hpp"

namespace gpa {

namespace {

constexpr std::array<std::string_view, 6> kPartitionNames = {
    "Text", "GlmSemantic", "BiSemantic", "Acoustic", "Global", "Control"};

constexpr std::array<std::string_view, kNumControls> kControlNames = {
    "BOS", "EOS", "SEP", "GEN", "TASK_TTS", "TASK_ASR", "TASK_VC", "PAD"};

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

std::string_view partition_name(PartitionKind kind) {
  return kPartitionNames[static_cast<std::size_t>(kind)];
}

std::optional<PartitionKind> partition_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kPartitionNames.size(); ++i)
    if (kPartitionNames[i] == name) return static_cast<PartitionKind>(i);
  return std::nullopt;
}

std::string_view control_name(Control c) { return kControlNames[static_cast<std::size_t>(c)]; }

std::optional<Control> control_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kControlNames.size(); ++i)
    if (kControlNames[i] == name) return static_cast<Control>(i);
  return std::nullopt;
}

VocabConfig default_vocab_config() {
  return {{PartitionKind::Text, 256},     {PartitionKind::GlmSemantic, 512},
          {PartitionKind::BiSemantic, 512}, {PartitionKind::Acoustic, 1024},
          {PartitionKind::Global, 64},    {PartitionKind::Control, 16}};
}

VocabLayout build_vocab(const VocabConfig& config) {
  VocabLayout layout;
  TokenId next = 0;
  for (PartitionKind kind : kPartitionOrder) {
    auto it = config.find(kind);
    std::int32_t size = it == config.end() ? 0 : it->second;
    if (size < 1)
      throw Error(Errc::ZeroPartition, std::string(partition_name(kind)) + " partition has size 0");
    layout.partitions_.push_back({kind, next, size});
    next += size;
  }
  const Partition& ctrl = layout.partition(PartitionKind::Control);
  if (ctrl.size < kNumControls)
    throw Error(Errc::ControlOverflow, "control partition holds " + std::to_string(ctrl.size) +
                                           " ids, need " + std::to_string(kNumControls));
  for (int i = 0; i < kNumControls; ++i) layout.control_map_[i] = ctrl.start + i;
  return layout;
}

PartitionKind VocabLayout::partition_of(TokenId id) const {
  if (id < 0 || id >= total())
    throw Error(Errc::OutOfVocab, "token " + std::to_string(id) + " outside vocab of " +
                                      std::to_string(total()));
  auto it = std::upper_bound(partitions_.begin(), partitions_.end(), id,
                             [](TokenId v, const Partition& p) { return v < p.start; });
  return std::prev(it)->kind;
}

nlohmann::json VocabLayout::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& p : partitions_)
    j[std::string(partition_name(p.kind))] = {{"start", p.start}, {"size", p.size}};
  nlohmann::json cm = nlohmann::json::object();
  for (int i = 0; i < kNumControls; ++i)
    cm[std::string(kControlNames[i])] = control_map_[i];
  j["control_map"] = cm;
  return j;
}

VocabLayout VocabLayout::from_json(const nlohmann::json& j) {
  VocabConfig config;
  try {
    for (PartitionKind kind : kPartitionOrder)
      config[kind] = j.at(std::string(partition_name(kind))).at("size").get<std::int32_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::Parse, std::string("vocab layout: ") + e.what());
  }
  VocabLayout layout = build_vocab(config);
  // Stored starts and controls must agree with the canonical construction.
  for (const auto& p : layout.partitions_) {
    if (j.at(std::string(partition_name(p.kind))).at("start").get<TokenId>() != p.start)
      throw Error(Errc::LayoutMismatch,
                  std::string(partition_name(p.kind)) + " start disagrees with partition order");
  }
  if (j.contains("control_map")) {
    for (int i = 0; i < kNumControls; ++i) {
      if (j["control_map"].at(std::string(kControlNames[i])).get<TokenId>() !=
          layout.control_map_[i])
        throw Error(Errc::LayoutMismatch, "control map entry " + std::string(kControlNames[i]));
    }
  }
  return layout;
}

std::string VocabLayout::fingerprint() const {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "vocab-%016llx",
                static_cast<unsigned long long>(fnv1a(to_json().dump())));
  return buf;
}

TokenSeq make_token_seq(const VocabLayout& layout, std::vector<TokenId> ids) {
  for (TokenId id : ids) layout.partition_of(id);
  return TokenSeq{std::move(ids), layout.fingerprint()};
}

// ---------------------------------------------------------------------------
// Grammar: recursive-descent parse into an AST, Thompson construction into an
// NFA, set simulation for matching.

namespace {

struct Atom {
  std::variant<PartitionKind, Control> what;
};

struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
  enum class Type { Atom, Concat, Alt, Repeat } type = Type::Atom;
  Atom atom{PartitionKind::Text};
  std::vector<NodePtr> children;
  int min = 0;
  int max = 0;  // -1 = unbounded
};

NodePtr make_node(Node::Type type) {
  auto n = std::make_shared<Node>();
  n->type = type;
  return n;
}

class PatternParser {
 public:
  explicit PatternParser(std::string_view s) : s_(s) {}

  NodePtr parse() {
    NodePtr n = parse_alt();
    skip_ws();
    if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
    return n;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) {
    throw Error(Errc::Parse, "grammar '" + std::string(s_) + "' at " + std::to_string(pos_) +
                                 ": " + msg);
  }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  NodePtr parse_alt() {
    auto first = parse_concat();
    skip_ws();
    if (pos_ >= s_.size() || s_[pos_] != '|') return first;
    auto alt = make_node(Node::Type::Alt);
    alt->children.push_back(first);
    while (pos_ < s_.size() && s_[pos_] == '|') {
      ++pos_;
      alt->children.push_back(parse_concat());
      skip_ws();
    }
    return alt;
  }

  NodePtr parse_concat() {
    auto cat = make_node(Node::Type::Concat);
    for (;;) {
      skip_ws();
      if (pos_ >= s_.size() || s_[pos_] == '|' || s_[pos_] == ')') break;
      cat->children.push_back(parse_postfix());
    }
    return cat;
  }

  NodePtr parse_postfix() {
    NodePtr n = parse_primary();
    for (;;) {
      if (pos_ >= s_.size()) break;
      char c = s_[pos_];
      int lo, hi;
      if (c == '*') {
        lo = 0, hi = -1, ++pos_;
      } else if (c == '+') {
        lo = 1, hi = -1, ++pos_;
      } else if (c == '?') {
        lo = 0, hi = 1, ++pos_;
      } else if (c == '{') {
        ++pos_;
        lo = parse_int();
        hi = lo;
        if (pos_ < s_.size() && s_[pos_] == ',') {
          ++pos_;
          hi = parse_int();
        }
        if (pos_ >= s_.size() || s_[pos_] != '}') fail("expected '}'");
        ++pos_;
        if (hi < lo) fail("bad repeat bounds");
      } else {
        break;
      }
      auto rep = make_node(Node::Type::Repeat);
      rep->children.push_back(n);
      rep->min = lo;
      rep->max = hi;
      n = rep;
    }
    return n;
  }

  int parse_int() {
    std::size_t start = pos_;
    while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    if (start == pos_) fail("expected number");
    return std::stoi(std::string(s_.substr(start, pos_ - start)));
  }

  NodePtr parse_primary() {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == '(') {
      ++pos_;
      NodePtr inner = parse_alt();
      skip_ws();
      if (pos_ >= s_.size() || s_[pos_] != ')') fail("expected ')'");
      ++pos_;
      return inner;
    }
    std::size_t start = pos_;
    while (pos_ < s_.size() &&
           (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
      ++pos_;
    if (start == pos_) fail("expected atom");
    std::string_view name = s_.substr(start, pos_ - start);
    auto n = make_node(Node::Type::Atom);
    if (auto k = partition_from_name(name)) {
      n->atom.what = *k;
    } else if (auto c = control_from_name(name)) {
      n->atom.what = *c;
    } else {
      fail("unknown atom '" + std::string(name) + "'");
    }
    return n;
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace

struct Grammar::Nfa {
  struct State {
    std::optional<Atom> consume;  // consuming edge to `next`
    int next = -1;
    std::vector<int> eps;
  };
  std::vector<State> states;
  int start = 0;
  int accept = 0;

  int add() {
    states.emplace_back();
    return static_cast<int>(states.size()) - 1;
  }

  // Builds a fragment for `n`; returns {entry, exit}.
  std::pair<int, int> build(const Node& n) {
    switch (n.type) {
      case Node::Type::Atom: {
        int a = add(), b = add();
        states[a].consume = n.atom;
        states[a].next = b;
        return {a, b};
      }
      case Node::Type::Concat: {
        int a = add();
        int cur = a;
        for (const auto& c : n.children) {
          auto [s, e] = build(*c);
          states[cur].eps.push_back(s);
          cur = e;
        }
        return {a, cur};
      }
      case Node::Type::Alt: {
        int a = add(), b = add();
        for (const auto& c : n.children) {
          auto [s, e] = build(*c);
          states[a].eps.push_back(s);
          states[e].eps.push_back(b);
        }
        return {a, b};
      }
      case Node::Type::Repeat: {
        const Node& child = *n.children.front();
        int a = add();
        int cur = a;
        for (int i = 0; i < n.min; ++i) {
          auto [s, e] = build(child);
          states[cur].eps.push_back(s);
          cur = e;
        }
        if (n.max < 0) {
          auto [s, e] = build(child);
          int out = add();
          states[cur].eps.push_back(s);
          states[cur].eps.push_back(out);
          states[e].eps.push_back(s);
          states[e].eps.push_back(out);
          return {a, out};
        }
        int out = add();
        for (int i = n.min; i < n.max; ++i) {
          states[cur].eps.push_back(out);
          auto [s, e] = build(child);
          states[cur].eps.push_back(s);
          cur = e;
        }
        states[cur].eps.push_back(out);
        return {a, out};
      }
    }
    return {0, 0};
  }

  void closure(std::vector<char>& in_set, std::vector<int>& set) const {
    std::vector<int> stack(set.begin(), set.end());
    while (!stack.empty()) {
      int s = stack.back();
      stack.pop_back();
      for (int t : states[s].eps) {
        if (!in_set[t]) {
          in_set[t] = 1;
          set.push_back(t);
          stack.push_back(t);
        }
      }
    }
  }
};

Grammar::Grammar(std::string_view pattern) : pattern_(pattern), nfa_(std::make_unique<Nfa>()) {
  NodePtr root = PatternParser(pattern).parse();
  auto [s, e] = nfa_->build(*root);
  nfa_->start = s;
  nfa_->accept = e;
}

Grammar::~Grammar() = default;
Grammar::Grammar(const Grammar& o) : pattern_(o.pattern_), nfa_(std::make_unique<Nfa>(*o.nfa_)) {}
Grammar& Grammar::operator=(const Grammar& o) {
  if (this != &o) {
    pattern_ = o.pattern_;
    nfa_ = std::make_unique<Nfa>(*o.nfa_);
  }
  return *this;
}
Grammar::Grammar(Grammar&&) noexcept = default;
Grammar& Grammar::operator=(Grammar&&) noexcept = default;

struct GrammarAccess {
  static const Grammar::Nfa& nfa(const Grammar& g) { return *g.nfa_; }
};

std::optional<Violation> validate_sequence(const VocabLayout& layout, std::span<const TokenId> ids,
                                           const Grammar& grammar) {
  const auto& nfa = GrammarAccess::nfa(grammar);
  const std::size_t n_states = nfa.states.size();
  std::vector<char> in_set(n_states, 0);
  std::vector<int> current{nfa.start};
  in_set[nfa.start] = 1;
  nfa.closure(in_set, current);

  for (std::size_t i = 0; i < ids.size(); ++i) {
    TokenId id = ids[i];
    if (id < 0 || id >= layout.total())
      return Violation{i, "token " + std::to_string(id) + " outside vocab"};
    PartitionKind kind = layout.partition_of(id);
    std::vector<char> next_in(n_states, 0);
    std::vector<int> next;
    for (int s : current) {
      const auto& st = nfa.states[s];
      if (!st.consume) continue;
      bool ok = std::visit(
          [&](auto v) {
            if constexpr (std::is_same_v<decltype(v), PartitionKind>)
              return kind == v;
            else
              return id == layout.control(v);
          },
          st.consume->what);
      if (ok && !next_in[st.next]) {
        next_in[st.next] = 1;
        next.push_back(st.next);
      }
    }
    if (next.empty())
      return Violation{i, "token " + std::to_string(id) + " (" +
                              std::string(partition_name(kind)) + ") not allowed by '" +
                              grammar.pattern() + "'"};
    nfa.closure(next_in, next);
    current = std::move(next);
    in_set = std::move(next_in);
  }
  if (!in_set[nfa.accept])
    return Violation{ids.size(), "sequence ends before '" + grammar.pattern() + "' completes"};
  return std::nullopt;
}

}  // namespace gpa
