#pragma once

// Bounded decision procedures for path equivalence in a presented category.
//
// Equations are oriented into rewrite rules (longer path -> shorter path,
// ties broken lexicographically), which terminates. When the critical pairs
// of the rule set are joinable the system is confluent and normal forms
// decide equivalence exactly. Otherwise answers come from a congruence
// closure over all paths up to a length bound.

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "functorium/schema.hpp"

namespace functorium {

inline constexpr std::size_t kDefaultMaxPathLength = 8;
inline constexpr std::size_t kDefaultRewriteSteps = 256;

struct RewriteRule {
  std::vector<std::string> pattern;      ///< non-empty, application order
  std::vector<std::string> replacement;  ///< strictly smaller in shortlex
};

class RewriteSystem {
 public:
  /// Orients every relation of `schema`. Relations whose sides coincide are
  /// dropped.
  explicit RewriteSystem(const Schema& schema, std::size_t max_steps = kDefaultRewriteSteps);

  const std::vector<RewriteRule>& rules() const noexcept { return rules_; }
  std::size_t max_steps() const noexcept { return max_steps_; }
  const Schema& schema() const noexcept { return schema_; }

  /// Rewrites leftmost-first, trying rules in declaration order at each
  /// position, until no rule applies. nullopt when the step budget runs out.
  std::optional<Path> normalize(const Path& path) const;

  /// All critical pairs (overlaps and inclusions) join under normalize.
  bool confluent() const;

 private:
  std::optional<std::vector<std::string>> normalize_word(std::vector<std::string> word) const;

  Schema schema_;
  std::vector<RewriteRule> rules_;
  std::size_t max_steps_;
};

/// Throws std::runtime_error("undecided: ...") when the step budget runs out.
Path normalize(const Path& path, const RewriteSystem& rw);

/// Partition of every path of length <= max_len into equivalence classes.
class PathPartition {
 public:
  const std::vector<Path>& paths() const noexcept { return paths_; }
  std::size_t max_len() const noexcept { return max_len_; }

  /// Class id of `p`, or nullopt if p lies outside the bound.
  std::optional<std::size_t> class_of(const Path& p) const;
  std::size_t class_count() const noexcept { return classes_.size(); }
  /// Members of a class, as indices into paths(), ascending.
  const std::vector<std::size_t>& members(std::size_t cls) const { return classes_.at(cls); }
  /// Shortlex-least member of a class.
  const Path& representative(std::size_t cls) const;
  std::vector<Path> representatives() const;

 private:
  friend PathPartition congruence_closure_bounded(const Schema& schema, std::size_t max_len);

  std::size_t max_len_ = 0;
  std::vector<Path> paths_;
  std::map<Path, std::size_t> index_;
  std::vector<std::size_t> class_of_;
  std::vector<std::vector<std::size_t>> classes_;
};

/// Smallest partition containing the relation pairs and closed under pre- and
/// post-composition with a single arrow whenever both composites stay within
/// the bound. Fixed-point union-find iteration.
PathPartition congruence_closure_bounded(const Schema& schema,
                                         std::size_t max_len = kDefaultMaxPathLength);

enum class Equivalence { kEqual, kDistinct, kUndecided };

const char* to_string(Equivalence e);

/// Reusable equivalence oracle for one schema. Immutable after construction.
class EquivalenceChecker {
 public:
  explicit EquivalenceChecker(const Schema& schema, std::size_t max_len = kDefaultMaxPathLength,
                              std::size_t max_steps = kDefaultRewriteSteps);

  /// Throws std::invalid_argument for ill-formed or non-parallel paths.
  Equivalence equivalent(const Path& p, const Path& q) const;

  bool confluent() const noexcept { return confluent_; }
  const RewriteSystem& rewrite_system() const noexcept { return rw_; }

 private:
  RewriteSystem rw_;
  bool confluent_;
  std::optional<PathPartition> closure_;  // only built when not confluent
};

Equivalence equivalent(const Path& p, const Path& q, const Schema& schema,
                       std::size_t max_len = kDefaultMaxPathLength);

}  // namespace functorium
