#pragma once

// Category presentations: a directed multigraph of objects and generating
// arrows plus path equations. Paths of the free category are explicit values;
// identities are paths with no arrows, anchored at their object.

#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace functorium {

/// Parse or validation failure, located at a 1-based line/column.
class SchemaError : public std::runtime_error {
 public:
  SchemaError(std::size_t line, std::size_t column, const std::string& message);

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }
  /// The message without the location prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::size_t line_;
  std::size_t column_;
  std::string detail_;
};

struct Arrow {
  std::string name;
  std::string source;
  std::string target;

  friend bool operator==(const Arrow&, const Arrow&) = default;
};

/// Objects and generating arrows. Parallel arrows with distinct names are fine.
class SchemaGraph {
 public:
  SchemaGraph() = default;
  /// Throws std::invalid_argument on duplicate names or dangling endpoints.
  SchemaGraph(std::vector<std::string> objects, std::vector<Arrow> arrows);

  const std::vector<std::string>& objects() const noexcept { return objects_; }
  const std::vector<Arrow>& arrows() const noexcept { return arrows_; }

  bool has_object(std::string_view name) const;
  const Arrow* find_arrow(std::string_view name) const;
  const Arrow& arrow(std::string_view name) const;  ///< throws if unknown
  /// Arrows leaving `object`, in declaration order.
  std::vector<const Arrow*> arrows_from(std::string_view object) const;
  /// Arrows entering `object`, in declaration order.
  std::vector<const Arrow*> arrows_into(std::string_view object) const;

 private:
  std::vector<std::string> objects_;
  std::vector<Arrow> arrows_;
  std::map<std::string, std::size_t, std::less<>> arrow_index_;
};

/// A morphism of the free category. Arrows are stored in application order:
/// arrows()[0] is applied first. The anchor is always the source object.
class Path {
 public:
  Path() = default;
  Path(std::string anchor, std::vector<std::string> arrows)
      : anchor_(std::move(anchor)), arrows_(std::move(arrows)) {}

  static Path identity(std::string object) { return Path(std::move(object), {}); }

  const std::string& anchor() const noexcept { return anchor_; }
  const std::vector<std::string>& arrows() const noexcept { return arrows_; }
  std::size_t length() const noexcept { return arrows_.size(); }
  bool is_identity() const noexcept { return arrows_.empty(); }

  /// Diagrammatic text as the DSL writes it: "g.f" for f then g, "id_A".
  std::string to_string() const;

  friend auto operator<=>(const Path&, const Path&) = default;
  friend bool operator==(const Path&, const Path&) = default;

 private:
  std::string anchor_;
  std::vector<std::string> arrows_;
};

/// Total order used to orient equations: shorter first, then lexicographic
/// on the arrow-name sequence, then anchor.
bool shortlex_less(const Path& a, const Path& b);

struct Relation {
  Path lhs;
  Path rhs;
  std::size_t line = 0;  ///< source line in the DSL text, 0 if built in code
};

class Schema {
 public:
  Schema() = default;
  /// Validates every relation: paths well-formed and parallel.
  Schema(std::string name, SchemaGraph graph, std::vector<Relation> relations);

  const std::string& name() const noexcept { return name_; }
  const SchemaGraph& graph() const noexcept { return graph_; }
  const std::vector<Relation>& relations() const noexcept { return relations_; }

  const std::string& source(const Path& p) const;
  const std::string& target(const Path& p) const;
  /// Throws std::invalid_argument if the path does not compose.
  void check_path(const Path& p) const;
  bool well_formed(const Path& p) const;

 private:
  std::string name_;
  SchemaGraph graph_;
  std::vector<Relation> relations_;
};

/// Parses the schema DSL. Throws SchemaError with a location on syntax or
/// validation failures.
Schema parse_schema(std::string_view text);

/// Concatenation: p first, then q. Throws std::invalid_argument when the
/// target of p is not the source of q.
Path compose(const SchemaGraph& graph, const Path& p, const Path& q);

/// Source object of a path over `graph`.
const std::string& path_source(const SchemaGraph& graph, const Path& p);
/// Target object of a path over `graph`.
const std::string& path_target(const SchemaGraph& graph, const Path& p);

/// All paths from `source` of length <= max_len, breadth-first: by length,
/// then extensions in arrow declaration order.
std::vector<Path> enumerate_paths(const Schema& schema, std::string_view source,
                                  std::size_t max_len);

/// enumerate_paths over every object, objects in declaration order.
std::vector<Path> enumerate_all_paths(const Schema& schema, std::size_t max_len);

}  // namespace functorium
