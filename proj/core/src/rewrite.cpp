#include "functorium/rewrite.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace functorium {

namespace {

using Word = std::vector<std::string>;

bool word_matches_at(const Word& word, std::size_t pos, const Word& pattern) {
  if (pos + pattern.size() > word.size()) return false;
  return std::equal(pattern.begin(), pattern.end(), word.begin() + static_cast<std::ptrdiff_t>(pos));
}

Word splice(const Word& word, std::size_t pos, std::size_t len, const Word& replacement) {
  Word out(word.begin(), word.begin() + static_cast<std::ptrdiff_t>(pos));
  out.insert(out.end(), replacement.begin(), replacement.end());
  out.insert(out.end(), word.begin() + static_cast<std::ptrdiff_t>(pos + len), word.end());
  return out;
}

Word concat_words(const Word& a, const Word& b) {
  Word out = a;
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

struct UnionFind {
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (b < a) std::swap(a, b);
    parent[b] = a;
    return true;
  }
  std::vector<std::size_t> parent;
};

}  // namespace

// ---------------------------------------------------------------------------
// RewriteSystem

RewriteSystem::RewriteSystem(const Schema& schema, std::size_t max_steps)
    : schema_(schema), max_steps_(max_steps) {
  if (max_steps == 0) throw std::invalid_argument("rewrite step budget must be positive");
  for (const auto& r : schema.relations()) {
    if (r.lhs == r.rhs) continue;
    const bool lhs_bigger = shortlex_less(r.rhs, r.lhs);
    const Path& big = lhs_bigger ? r.lhs : r.rhs;
    const Path& small = lhs_bigger ? r.rhs : r.lhs;
    // Parallel identities are equal paths, so `big` always has arrows here.
    rules_.push_back({big.arrows(), small.arrows()});
  }
}

std::optional<Word> RewriteSystem::normalize_word(Word word) const {
  for (std::size_t step = 0;; ++step) {
    bool rewritten = false;
    for (std::size_t pos = 0; pos < word.size() && !rewritten; ++pos) {
      for (const auto& rule : rules_) {
        if (word_matches_at(word, pos, rule.pattern)) {
          if (step >= max_steps_) return std::nullopt;
          word = splice(word, pos, rule.pattern.size(), rule.replacement);
          rewritten = true;
          break;
        }
      }
    }
    if (!rewritten) return word;
  }
}

std::optional<Path> RewriteSystem::normalize(const Path& path) const {
  schema_.check_path(path);
  auto word = normalize_word(path.arrows());
  if (!word) return std::nullopt;
  return Path(path.anchor(), std::move(*word));
}

bool RewriteSystem::confluent() const {
  auto joinable = [this](const Word& a, const Word& b) {
    auto na = normalize_word(a);
    auto nb = normalize_word(b);
    return na && nb && *na == *nb;
  };
  for (const auto& r1 : rules_) {
    for (const auto& r2 : rules_) {
      const Word& l1 = r1.pattern;
      const Word& l2 = r2.pattern;
      // Proper overlap: suffix of l1 equals prefix of l2.
      for (std::size_t k = 1; k < l1.size() && k < l2.size(); ++k) {
        if (!std::equal(l1.end() - static_cast<std::ptrdiff_t>(k), l1.end(), l2.begin())) continue;
        const Word u(l1.begin(), l1.end() - static_cast<std::ptrdiff_t>(k));
        const Word v(l2.begin() + static_cast<std::ptrdiff_t>(k), l2.end());
        if (!joinable(concat_words(r1.replacement, v), concat_words(u, r2.replacement))) {
          return false;
        }
      }
      // Inclusion: l2 occurs inside l1.
      if (&r1 != &r2) {
        for (std::size_t pos = 0; pos + l2.size() <= l1.size(); ++pos) {
          if (!word_matches_at(l1, pos, l2)) continue;
          if (!joinable(r1.replacement, splice(l1, pos, l2.size(), r2.replacement))) {
            return false;
          }
        }
      }
    }
  }
  return true;
}

Path normalize(const Path& path, const RewriteSystem& rw) {
  auto nf = rw.normalize(path);
  if (!nf) {
    throw std::runtime_error("undecided: rewrite budget of " + std::to_string(rw.max_steps()) +
                             " steps exhausted normalizing " + path.to_string());
  }
  return *nf;
}

// ---------------------------------------------------------------------------
// Congruence closure

std::optional<std::size_t> PathPartition::class_of(const Path& p) const {
  auto it = index_.find(p);
  if (it == index_.end()) return std::nullopt;
  return class_of_[it->second];
}

const Path& PathPartition::representative(std::size_t cls) const {
  const auto& m = classes_.at(cls);
  const Path* best = &paths_[m.front()];
  for (std::size_t i : m)
    if (shortlex_less(paths_[i], *best)) best = &paths_[i];
  return *best;
}

std::vector<Path> PathPartition::representatives() const {
  std::vector<Path> out;
  for (std::size_t c = 0; c < classes_.size(); ++c) out.push_back(representative(c));
  return out;
}

PathPartition congruence_closure_bounded(const Schema& schema, std::size_t max_len) {
  if (max_len < 1) throw std::invalid_argument("closure bound must be at least 1");
  const auto& graph = schema.graph();

  PathPartition part;
  part.max_len_ = max_len;
  part.paths_ = enumerate_all_paths(schema, max_len);
  for (std::size_t i = 0; i < part.paths_.size(); ++i) part.index_.emplace(part.paths_[i], i);

  auto lookup = [&](const Path& p) -> std::optional<std::size_t> {
    auto it = part.index_.find(p);
    if (it == part.index_.end()) return std::nullopt;
    return it->second;
  };

  UnionFind uf(part.paths_.size());
  for (const auto& r : schema.relations()) {
    auto a = lookup(r.lhs);
    auto b = lookup(r.rhs);
    if (a && b) uf.unite(*a, *b);
  }

  // Each member only needs to be glued to its root's context: transitivity
  // does the rest.
  const std::size_t n = part.paths_.size();
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t r = uf.find(i);
      if (r == i) continue;
      const Path& pi = part.paths_[i];
      const Path& pr = part.paths_[r];
      for (const Arrow* k : graph.arrows_from(path_target(graph, pi))) {
        const Path step(k->source, {k->name});
        auto a = lookup(compose(graph, pi, step));
        auto b = lookup(compose(graph, pr, step));
        if (a && b) changed |= uf.unite(*a, *b);
      }
      for (const Arrow* k : graph.arrows_into(path_source(graph, pi))) {
        const Path step(k->source, {k->name});
        auto a = lookup(compose(graph, step, pi));
        auto b = lookup(compose(graph, step, pr));
        if (a && b) changed |= uf.unite(*a, *b);
      }
    }
  }

  std::map<std::size_t, std::size_t> root_to_class;
  part.class_of_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t root = uf.find(i);
    auto [it, inserted] = root_to_class.emplace(root, part.classes_.size());
    if (inserted) part.classes_.emplace_back();
    part.classes_[it->second].push_back(i);
    part.class_of_[i] = it->second;
  }
  return part;
}

// ---------------------------------------------------------------------------
// Equivalence

const char* to_string(Equivalence e) {
  switch (e) {
    case Equivalence::kEqual: return "equal";
    case Equivalence::kDistinct: return "distinct";
    case Equivalence::kUndecided: return "undecided";
  }
  return "?";
}

EquivalenceChecker::EquivalenceChecker(const Schema& schema, std::size_t max_len,
                                       std::size_t max_steps)
    : rw_(schema, max_steps), confluent_(rw_.confluent()) {
  if (!confluent_) closure_ = congruence_closure_bounded(rw_.schema(), max_len);
}

Equivalence EquivalenceChecker::equivalent(const Path& p, const Path& q) const {
  const Schema& schema = rw_.schema();
  schema.check_path(p);
  schema.check_path(q);
  if (schema.source(p) != schema.source(q) || schema.target(p) != schema.target(q)) {
    throw std::invalid_argument("non-parallel paths " + p.to_string() + " and " + q.to_string());
  }
  if (p == q) return Equivalence::kEqual;

  const auto np = rw_.normalize(p);
  const auto nq = rw_.normalize(q);
  if (np && nq) {
    if (*np == *nq) return Equivalence::kEqual;
    if (confluent_) return Equivalence::kDistinct;
  }

  if (!closure_) return Equivalence::kUndecided;
  const auto cp = closure_->class_of(p);
  const auto cq = closure_->class_of(q);
  if (cp && cq) return *cp == *cq ? Equivalence::kEqual : Equivalence::kDistinct;
  return Equivalence::kUndecided;
}

Equivalence equivalent(const Path& p, const Path& q, const Schema& schema, std::size_t max_len) {
  return EquivalenceChecker(schema, max_len).equivalent(p, q);
}

}  // namespace functorium
