#include "doctest.h"

#include <random>
#include <set>

#include "functorium/rewrite.hpp"

using namespace functorium;

namespace {

const char* kCycle =
    "schema CycleGAN { objects: A, B arrows: f : A -> B, g : B -> A "
    "equations: g . f = id_A, f . g = id_B }";

}  // namespace

TEST_CASE("rules are oriented from longer to shorter") {
  RewriteSystem rw(parse_schema(kCycle));
  REQUIRE(rw.rules().size() == 2);
  CHECK(rw.rules()[0].pattern == std::vector<std::string>{"f", "g"});
  CHECK(rw.rules()[0].replacement.empty());
  CHECK(rw.max_steps() == kDefaultRewriteSteps);
}

TEST_CASE("normalize on the two-domain presentation") {
  RewriteSystem rw(parse_schema(kCycle));
  CHECK(normalize(Path("A", {"f", "g"}), rw) == Path::identity("A"));
  CHECK(normalize(Path::identity("A"), rw) == Path::identity("A"));
  CHECK(normalize(Path("A", {"f", "g", "f"}), rw) == Path("A", {"f"}));
  CHECK(normalize(Path("B", {"g", "f", "g", "f", "g"}), rw) == Path("B", {"g"}));
  CHECK(rw.confluent());
}

TEST_CASE("normalize is idempotent and preserves endpoints") {
  Schema s = parse_schema(kCycle);
  RewriteSystem rw(s);
  for (const auto& p : enumerate_all_paths(s, 8)) {
    Path n = normalize(p, rw);
    CHECK(normalize(n, rw) == n);
    CHECK(s.source(n) == s.source(p));
    CHECK(s.target(n) == s.target(p));
  }
}

TEST_CASE("step budget exhaustion is undecided") {
  Schema s = parse_schema(kCycle);
  RewriteSystem tight(s, 2);
  CHECK_FALSE(tight.normalize(Path("A", {"f", "g", "f", "g", "f", "g"})).has_value());
  CHECK_THROWS_WITH_AS(normalize(Path("A", {"f", "g", "f", "g", "f", "g"}), tight),
                       doctest::Contains("undecided"), std::runtime_error);
  CHECK(tight.normalize(Path("A", {"f", "g"})) == Path::identity("A"));
}

TEST_CASE("congruence closure on the two-domain presentation") {
  Schema s = parse_schema(kCycle);
  PathPartition part = congruence_closure_bounded(s, 4);
  std::set<Path> reps;
  for (const auto& r : part.representatives()) reps.insert(r);
  CHECK(reps == std::set<Path>{Path::identity("A"), Path::identity("B"), Path("A", {"f"}),
                               Path("B", {"g"})});
  const auto idA = part.class_of(Path::identity("A"));
  for (const auto& p : enumerate_paths(s, "A", 4)) {
    if (s.target(p) == "A") CHECK(part.class_of(p) == idA);
  }
  CHECK_FALSE(part.class_of(Path("A", {"f", "g", "f", "g", "f"})).has_value());
}

TEST_CASE("no relations gives singleton classes") {
  Schema s = parse_schema("schema F { objects: A, B arrows: f : A -> B, g : B -> A }");
  PathPartition part = congruence_closure_bounded(s, 5);
  CHECK(part.class_count() == part.paths().size());
}

TEST_CASE("parallel generators merged by one relation") {
  Schema s = parse_schema(
      "schema P { objects: A, B, C arrows: f : A -> B, h : A -> B, k : B -> C "
      "equations: f = h }");
  PathPartition part = congruence_closure_bounded(s, 3);
  CHECK(part.class_of(Path("A", {"f"})) == part.class_of(Path("A", {"h"})));
  CHECK(part.class_of(Path("A", {"f", "k"})) == part.class_of(Path("A", {"h", "k"})));
  CHECK(part.class_of(Path("A", {"f"})) != part.class_of(Path::identity("A")));
  CHECK(equivalent(Path("A", {"f", "k"}), Path("A", {"h", "k"}), s) == Equivalence::kEqual);
}

TEST_CASE("equivalent basics") {
  Schema s = parse_schema(kCycle);
  CHECK(equivalent(Path("A", {"f", "g"}), Path::identity("A"), s) == Equivalence::kEqual);
  CHECK(equivalent(Path("A", {"f"}), Path("A", {"f"}), s) == Equivalence::kEqual);
  Schema free2 = parse_schema("schema F { objects: A, B arrows: f : A -> B, h : A -> B }");
  CHECK(equivalent(Path("A", {"f"}), Path("A", {"h"}), free2) == Equivalence::kDistinct);
  CHECK_THROWS_AS(equivalent(Path("A", {"f"}), Path::identity("A"), s), std::invalid_argument);
  CHECK(std::string(to_string(Equivalence::kUndecided)) == "undecided");
}

TEST_CASE("non-confluent system falls back to the bounded closure") {
  // a.a = b and a.b = b.a style overlap that orientation alone does not close.
  Schema s = parse_schema(
      "schema N { objects: X arrows: a : X -> X, b : X -> X, c : X -> X "
      "equations: b . a = c, c . b = a }");
  EquivalenceChecker eq(s, 4);
  PathPartition part = congruence_closure_bounded(s, 4);
  if (!eq.confluent()) {
    for (const auto& p : part.paths())
      for (const auto& q : part.paths()) {
        const bool same = part.class_of(p) == part.class_of(q);
        CHECK(eq.equivalent(p, q) == (same ? Equivalence::kEqual : Equivalence::kDistinct));
      }
    Path longp("X", std::vector<std::string>(5, "a"));
    CHECK(eq.equivalent(longp, Path::identity("X")) == Equivalence::kUndecided);
  }
  // Either way the answers within the bound are a congruence containing the relations.
  CHECK(eq.equivalent(Path("X", {"a", "b"}), Path("X", {"c"})) == Equivalence::kEqual);
}

TEST_CASE("equivalence is an equivalence relation on random small schemas") {
  std::mt19937_64 gen(11);
  const std::vector<std::string> names{"a", "b", "c"};
  for (int trial = 0; trial < 15; ++trial) {
    std::uniform_int_distribution<int> pick(0, 2), len(0, 2);
    std::string eqs;
    const int n_rel = 1 + pick(gen) % 2;
    for (int r = 0; r < n_rel; ++r) {
      auto word = [&] {
        int l = len(gen);
        if (l == 0) return std::string("id_X");
        std::string w = names[pick(gen)];
        for (int i = 1; i < l; ++i) w += "." + names[pick(gen)];
        return w;
      };
      eqs += (r ? ", " : "") + word() + " = " + word();
    }
    Schema s = parse_schema("schema R { objects: X arrows: a : X -> X, b : X -> X, c : X -> X "
                            "equations: " + eqs + " }");
    EquivalenceChecker eq(s, 3);
    auto paths = enumerate_all_paths(s, 2);
    for (const auto& p : paths) {
      CHECK(eq.equivalent(p, p) == Equivalence::kEqual);
      for (const auto& q : paths) {
        const auto pq = eq.equivalent(p, q);
        CHECK(pq == eq.equivalent(q, p));
        if (pq != Equivalence::kEqual) continue;
        for (const auto& r : paths) {
          if (eq.equivalent(q, r) == Equivalence::kEqual) CHECK(eq.equivalent(p, r) == Equivalence::kEqual);
        }
      }
    }
  }
}
