#include "functorium/schema.hpp"

#include <algorithm>
#include <cctype>
#include <set>

namespace functorium {

SchemaError::SchemaError(std::size_t line, std::size_t column, const std::string& message)
    : std::runtime_error(std::to_string(line) + ":" + std::to_string(column) + ": " + message),
      line_(line),
      column_(column),
      detail_(message) {}

// ---------------------------------------------------------------------------
// SchemaGraph

SchemaGraph::SchemaGraph(std::vector<std::string> objects, std::vector<Arrow> arrows)
    : objects_(std::move(objects)), arrows_(std::move(arrows)) {
  std::set<std::string, std::less<>> seen;
  for (const auto& o : objects_) {
    if (o.empty()) throw std::invalid_argument("empty object name");
    if (!seen.insert(o).second) throw std::invalid_argument("duplicate object '" + o + "'");
  }
  for (std::size_t i = 0; i < arrows_.size(); ++i) {
    const Arrow& a = arrows_[i];
    if (a.name.empty()) throw std::invalid_argument("empty arrow name");
    if (!arrow_index_.emplace(a.name, i).second) {
      throw std::invalid_argument("duplicate arrow '" + a.name + "'");
    }
    if (!has_object(a.source) || !has_object(a.target)) {
      throw std::invalid_argument("arrow '" + a.name + "' references an unknown object");
    }
  }
}

bool SchemaGraph::has_object(std::string_view name) const {
  return std::find(objects_.begin(), objects_.end(), name) != objects_.end();
}

const Arrow* SchemaGraph::find_arrow(std::string_view name) const {
  auto it = arrow_index_.find(name);
  return it == arrow_index_.end() ? nullptr : &arrows_[it->second];
}

const Arrow& SchemaGraph::arrow(std::string_view name) const {
  const Arrow* a = find_arrow(name);
  if (!a) throw std::invalid_argument("unknown arrow '" + std::string(name) + "'");
  return *a;
}

std::vector<const Arrow*> SchemaGraph::arrows_from(std::string_view object) const {
  std::vector<const Arrow*> out;
  for (const auto& a : arrows_)
    if (a.source == object) out.push_back(&a);
  return out;
}

std::vector<const Arrow*> SchemaGraph::arrows_into(std::string_view object) const {
  std::vector<const Arrow*> out;
  for (const auto& a : arrows_)
    if (a.target == object) out.push_back(&a);
  return out;
}

// ---------------------------------------------------------------------------
// Path

std::string Path::to_string() const {
  if (arrows_.empty()) return "id_" + anchor_;
  std::string out;
  for (auto it = arrows_.rbegin(); it != arrows_.rend(); ++it) {
    if (!out.empty()) out += ".";
    out += *it;
  }
  return out;
}

bool shortlex_less(const Path& a, const Path& b) {
  if (a.length() != b.length()) return a.length() < b.length();
  if (a.arrows() != b.arrows()) return a.arrows() < b.arrows();
  return a.anchor() < b.anchor();
}

const std::string& path_source(const SchemaGraph& graph, const Path& p) {
  if (p.is_identity()) return p.anchor();
  return graph.arrow(p.arrows().front()).source;
}

const std::string& path_target(const SchemaGraph& graph, const Path& p) {
  if (p.is_identity()) return p.anchor();
  return graph.arrow(p.arrows().back()).target;
}

Path compose(const SchemaGraph& graph, const Path& p, const Path& q) {
  const auto& mid = path_target(graph, p);
  const auto& next = path_source(graph, q);
  if (mid != next) {
    throw std::invalid_argument("cannot compose " + p.to_string() + " (ends at " + mid +
                                ") with " + q.to_string() + " (starts at " + next + ")");
  }
  std::vector<std::string> arrows = p.arrows();
  arrows.insert(arrows.end(), q.arrows().begin(), q.arrows().end());
  return Path(p.anchor(), std::move(arrows));
}

// ---------------------------------------------------------------------------
// Schema

Schema::Schema(std::string name, SchemaGraph graph, std::vector<Relation> relations)
    : name_(std::move(name)), graph_(std::move(graph)), relations_(std::move(relations)) {
  if (graph_.objects().empty()) throw std::invalid_argument("schema has no objects");
  for (const auto& r : relations_) {
    check_path(r.lhs);
    check_path(r.rhs);
    if (source(r.lhs) != source(r.rhs) || target(r.lhs) != target(r.rhs)) {
      throw std::invalid_argument("non-parallel relation " + r.lhs.to_string() + " = " +
                                  r.rhs.to_string());
    }
  }
}

const std::string& Schema::source(const Path& p) const { return path_source(graph_, p); }
const std::string& Schema::target(const Path& p) const { return path_target(graph_, p); }

void Schema::check_path(const Path& p) const {
  if (p.is_identity()) {
    if (!graph_.has_object(p.anchor())) {
      throw std::invalid_argument("identity on unknown object '" + p.anchor() + "'");
    }
    return;
  }
  const Arrow* prev = nullptr;
  for (const auto& name : p.arrows()) {
    const Arrow* a = graph_.find_arrow(name);
    if (!a) throw std::invalid_argument("unknown arrow '" + name + "'");
    if (prev && prev->target != a->source) {
      throw std::invalid_argument("path " + p.to_string() + " does not compose at '" + name +
                                  "'");
    }
    prev = a;
  }
  if (p.anchor() != graph_.arrow(p.arrows().front()).source) {
    throw std::invalid_argument("path " + p.to_string() + " anchored at '" + p.anchor() +
                                "' instead of its source");
  }
}

bool Schema::well_formed(const Path& p) const {
  try {
    check_path(p);
    return true;
  } catch (const std::invalid_argument&) {
    return false;
  }
}

// ---------------------------------------------------------------------------
// Enumeration

std::vector<Path> enumerate_paths(const Schema& schema, std::string_view source,
                                  std::size_t max_len) {
  const auto& graph = schema.graph();
  if (!graph.has_object(source)) {
    throw std::invalid_argument("unknown object '" + std::string(source) + "'");
  }
  std::vector<Path> out{Path::identity(std::string(source))};
  std::size_t level_begin = 0;
  for (std::size_t len = 1; len <= max_len; ++len) {
    const std::size_t level_end = out.size();
    for (std::size_t i = level_begin; i < level_end; ++i) {
      const std::string end = path_target(graph, out[i]);
      for (const Arrow* a : graph.arrows_from(end)) {
        auto arrows = out[i].arrows();
        arrows.push_back(a->name);
        out.emplace_back(std::string(source), std::move(arrows));
      }
    }
    if (out.size() == level_end) break;
    level_begin = level_end;
  }
  return out;
}

std::vector<Path> enumerate_all_paths(const Schema& schema, std::size_t max_len) {
  std::vector<Path> out;
  for (const auto& o : schema.graph().objects()) {
    auto part = enumerate_paths(schema, o, max_len);
    out.insert(out.end(), std::make_move_iterator(part.begin()),
               std::make_move_iterator(part.end()));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Parser

namespace {

enum class Tok { kIdent, kLBrace, kRBrace, kColon, kComma, kArrow, kEquals, kDot, kEnd };

struct Token {
  Tok kind;
  std::string text;
  std::size_t line;
  std::size_t column;
};

const char* describe(Tok t) {
  switch (t) {
    case Tok::kIdent: return "identifier";
    case Tok::kLBrace: return "'{'";
    case Tok::kRBrace: return "'}'";
    case Tok::kColon: return "':'";
    case Tok::kComma: return "','";
    case Tok::kArrow: return "'->'";
    case Tok::kEquals: return "'='";
    case Tok::kDot: return "'.'";
    case Tok::kEnd: return "end of input";
  }
  return "?";
}

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> out;
  std::size_t line = 1, col = 1, i = 0;
  auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n; ++k, ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
  };
  while (i < text.size()) {
    const char c = text[i];
    if (c == '#') {
      while (i < text.size() && text[i] != '\n') advance(1);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    const std::size_t tl = line, tc = col;
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < text.size() &&
             (std::isalnum(static_cast<unsigned char>(text[j])) || text[j] == '_'))
        ++j;
      out.push_back({Tok::kIdent, std::string(text.substr(i, j - i)), tl, tc});
      advance(j - i);
      continue;
    }
    if (c == '-' && i + 1 < text.size() && text[i + 1] == '>') {
      out.push_back({Tok::kArrow, "->", tl, tc});
      advance(2);
      continue;
    }
    Tok kind;
    switch (c) {
      case '{': kind = Tok::kLBrace; break;
      case '}': kind = Tok::kRBrace; break;
      case ':': kind = Tok::kColon; break;
      case ',': kind = Tok::kComma; break;
      case '=': kind = Tok::kEquals; break;
      case '.': kind = Tok::kDot; break;
      default:
        throw SchemaError(tl, tc, std::string("syntax error: unexpected character '") + c + "'");
    }
    out.push_back({kind, std::string(1, c), tl, tc});
    advance(1);
  }
  out.push_back({Tok::kEnd, "", line, col});
  return out;
}

struct PathSyntax {
  std::vector<Token> parts;  // as written, left to right
  bool identity = false;
  std::string identity_object;
  std::size_t line = 0, column = 0;
};

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

  Schema parse() {
    expect_keyword("schema");
    const Token name = expect(Tok::kIdent);
    expect(Tok::kLBrace);

    expect_keyword("objects");
    expect(Tok::kColon);
    std::vector<std::string> objects;
    std::vector<Token> object_tokens;
    if (!at_section_start()) {
      do {
        const Token t = expect(Tok::kIdent);
        if (std::find(objects.begin(), objects.end(), t.text) != objects.end()) {
          throw SchemaError(t.line, t.column, "duplicate object name '" + t.text + "'");
        }
        objects.push_back(t.text);
      } while (accept(Tok::kComma));
    }
    if (objects.empty()) {
      throw SchemaError(peek().line, peek().column, "syntax error: expected at least one object");
    }

    std::vector<Arrow> arrows;
    if (peek_keyword("arrows")) {
      next();
      expect(Tok::kColon);
      if (!at_section_start()) {
        do {
          const Token n = expect(Tok::kIdent);
          expect(Tok::kColon);
          const Token s = expect(Tok::kIdent);
          expect(Tok::kArrow);
          const Token t = expect(Tok::kIdent);
          if (n.text.rfind("id_", 0) == 0) {
            throw SchemaError(n.line, n.column,
                              "arrow name '" + n.text + "' uses the reserved prefix id_");
          }
          for (const auto& a : arrows)
            if (a.name == n.text)
              throw SchemaError(n.line, n.column, "duplicate arrow name '" + n.text + "'");
          for (const Token* ep : {&s, &t})
            if (std::find(objects.begin(), objects.end(), ep->text) == objects.end())
              throw SchemaError(ep->line, ep->column,
                                "unknown object '" + ep->text + "' in arrow '" + n.text + "'");
          arrows.push_back({n.text, s.text, t.text});
        } while (accept(Tok::kComma));
      }
    }
    SchemaGraph graph(objects, arrows);

    std::vector<Relation> relations;
    if (peek_keyword("equations")) {
      next();
      expect(Tok::kColon);
      if (!at_section_start()) {
        do {
          PathSyntax lhs = parse_path();
          expect(Tok::kEquals);
          PathSyntax rhs = parse_path();
          relations.push_back(build_relation(graph, lhs, rhs));
        } while (accept(Tok::kComma));
      }
    }
    expect(Tok::kRBrace);
    expect(Tok::kEnd);
    return Schema(name.text, std::move(graph), std::move(relations));
  }

 private:
  const Token& peek() const { return toks_[pos_]; }
  Token next() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }

  bool accept(Tok k) {
    if (peek().kind != k) return false;
    next();
    return true;
  }

  Token expect(Tok k) {
    if (peek().kind != k) {
      throw SchemaError(peek().line, peek().column,
                        std::string("syntax error: expected ") + describe(k) + ", found " +
                            (peek().kind == Tok::kIdent ? "'" + peek().text + "'"
                                                        : std::string(describe(peek().kind))));
    }
    return next();
  }

  bool peek_keyword(std::string_view kw) const {
    return peek().kind == Tok::kIdent && peek().text == kw && pos_ + 1 < toks_.size() &&
           toks_[pos_ + 1].kind == Tok::kColon;
  }

  void expect_keyword(std::string_view kw) {
    if (peek().kind != Tok::kIdent || peek().text != kw) {
      throw SchemaError(peek().line, peek().column,
                        "syntax error: expected '" + std::string(kw) + "'");
    }
    next();
  }

  bool at_section_start() const {
    return peek().kind == Tok::kRBrace || peek_keyword("arrows") || peek_keyword("equations");
  }

  PathSyntax parse_path() {
    PathSyntax p;
    const Token first = expect(Tok::kIdent);
    p.line = first.line;
    p.column = first.column;
    if (first.text.rfind("id_", 0) == 0) {
      p.identity = true;
      p.identity_object = first.text.substr(3);
      if (peek().kind == Tok::kDot) {
        throw SchemaError(peek().line, peek().column,
                          "syntax error: identity paths cannot be composed in equations");
      }
      return p;
    }
    p.parts.push_back(first);
    while (accept(Tok::kDot)) p.parts.push_back(expect(Tok::kIdent));
    return p;
  }

  static Path resolve(const SchemaGraph& graph, const PathSyntax& syn) {
    if (syn.identity) {
      if (!graph.has_object(syn.identity_object)) {
        throw SchemaError(syn.line, syn.column,
                          "unknown object '" + syn.identity_object + "' in identity");
      }
      return Path::identity(syn.identity_object);
    }
    // Written right to left ("g.f" = f then g); stored in application order.
    std::vector<std::string> arrows;
    const Arrow* prev = nullptr;
    for (auto it = syn.parts.rbegin(); it != syn.parts.rend(); ++it) {
      const Arrow* a = graph.find_arrow(it->text);
      if (!a) throw SchemaError(it->line, it->column, "unknown arrow '" + it->text + "'");
      if (prev && prev->target != a->source) {
        throw SchemaError(it->line, it->column,
                          "ill-typed path: '" + it->text + "' starts at " + a->source +
                              " but the preceding arrow ends at " + prev->target);
      }
      arrows.push_back(a->name);
      prev = a;
    }
    const std::string src = graph.arrow(arrows.front()).source;
    return Path(src, std::move(arrows));
  }

  static Relation build_relation(const SchemaGraph& graph, const PathSyntax& l,
                                 const PathSyntax& r) {
    Relation rel{resolve(graph, l), resolve(graph, r), l.line};
    if (path_source(graph, rel.lhs) != path_source(graph, rel.rhs) ||
        path_target(graph, rel.lhs) != path_target(graph, rel.rhs)) {
      throw SchemaError(l.line, l.column,
                        "non-parallel relation: " + rel.lhs.to_string() + " : " +
                            path_source(graph, rel.lhs) + " -> " + path_target(graph, rel.lhs) +
                            " vs " + rel.rhs.to_string() + " : " + path_source(graph, rel.rhs) +
                            " -> " + path_target(graph, rel.rhs));
    }
    return rel;
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

}  // namespace

Schema parse_schema(std::string_view text) { return Parser(tokenize(text)).parse(); }

}  // namespace functorium
