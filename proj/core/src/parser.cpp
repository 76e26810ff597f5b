#include "layerlimit/syntax.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <sstream>

namespace layerlimit {

namespace {

enum class Tok {
  kIdent,
  kInt,
  kSemi,
  kComma,
  kLParen,
  kRParen,
  kSlash,
  kColon,
  kAnd,
  kOr,
  kNot,
  kArrow,
  kEq,
  kNeq,
  kNewline,
  kEnd
};

struct Token {
  Tok kind;
  std::string text;
  int line;
  int column;
};

std::vector<Token> tokenize(std::string_view src) {
  std::vector<Token> out;
  int line = 1;
  int col = 1;
  int depth = 0;
  std::size_t i = 0;
  auto push = [&](Tok k, std::string t, int c) { out.push_back({k, std::move(t), line, c}); };
  while (i < src.size()) {
    const char c = src[i];
    if (c == '#') {
      while (i < src.size() && src[i] != '\n') ++i;
      continue;
    }
    if (c == '\n') {
      if (depth == 0) push(Tok::kNewline, "\\n", col);
      ++line;
      col = 1;
      ++i;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      ++col;
      continue;
    }
    const int start = col;
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_')) ++j;
      push(Tok::kIdent, std::string(src.substr(i, j - i)), start);
      col += static_cast<int>(j - i);
      i = j;
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      push(Tok::kInt, std::string(src.substr(i, j - i)), start);
      col += static_cast<int>(j - i);
      i = j;
      continue;
    }
    auto two = [&](char a, char b) { return c == a && i + 1 < src.size() && src[i + 1] == b; };
    if (two('-', '>')) {
      push(Tok::kArrow, "->", start);
      i += 2;
      col += 2;
      continue;
    }
    if (two('!', '=')) {
      push(Tok::kNeq, "!=", start);
      i += 2;
      col += 2;
      continue;
    }
    Tok k;
    switch (c) {
      case ';': k = Tok::kSemi; break;
      case ',': k = Tok::kComma; break;
      case '(': k = Tok::kLParen; ++depth; break;
      case ')': k = Tok::kRParen; depth = depth > 0 ? depth - 1 : 0; break;
      case '/': k = Tok::kSlash; break;
      case ':': k = Tok::kColon; break;
      case '&': k = Tok::kAnd; break;
      case '|': k = Tok::kOr; break;
      case '!': k = Tok::kNot; break;
      case '=': k = Tok::kEq; break;
      default: {
        unsigned char uc = static_cast<unsigned char>(c);
        throw ParseError(std::string("unexpected character '") + (uc < 128 ? std::string(1, c) : "?") + "'",
                         line, col);
      }
    }
    push(k, std::string(1, c), start);
    ++i;
    ++col;
  }
  push(Tok::kEnd, "<end>", col);
  return out;
}

bool is_keyword(const std::string& s) {
  return s == "rel" || s == "forall" || s == "exists" || s == "type" || s == "axiom";
}

// Recursive-descent parser shared by theory, type, fragment and formula inputs.
class Parser {
 public:
  Parser(std::string_view text, RelationalLanguage& language) : toks_(tokenize(text)), lang_(language) {}

  const Token& peek(int ahead = 0) const {
    std::size_t k = std::min(pos_ + ahead, toks_.size() - 1);
    return toks_[k];
  }
  bool at(Tok k) const { return peek().kind == k; }
  bool at_ident(const char* s) const { return peek().kind == Tok::kIdent && peek().text == s; }
  Token take() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }
  [[noreturn]] void fail(const std::string& msg, const Token& t) const {
    throw ParseError(msg, t.line, t.column);
  }
  Token expect(Tok k, const char* what) {
    if (!at(k)) fail(std::string("expected ") + what + ", found '" + peek().text + "'", peek());
    return take();
  }
  void skip_newlines() {
    while (at(Tok::kNewline)) take();
  }
  void skip_separators() {
    while (at(Tok::kNewline) || at(Tok::kSemi)) take();
  }
  // Looks past newlines for a binary operator so formulas may continue on
  // the next line after a line break.
  bool continue_with(Tok op) {
    std::size_t k = pos_;
    while (toks_[k].kind == Tok::kNewline) ++k;
    if (toks_[k].kind != op) return false;
    pos_ = k;
    return true;
  }
  void end_statement() {
    if (at(Tok::kSemi) || at(Tok::kNewline) || at(Tok::kEnd)) return;
    fail("expected end of statement, found '" + peek().text + "'", peek());
  }

  // rel NAME/ARITY {, NAME/ARITY}
  void parse_rel_decls() {
    for (;;) {
      Token name = expect(Tok::kIdent, "relation name");
      if (is_keyword(name.text)) fail("keyword used as relation name", name);
      expect(Tok::kSlash, "'/'");
      Token ar = expect(Tok::kInt, "arity");
      try {
        lang_.add(name.text, std::stoi(ar.text));
      } catch (const Error& e) {
        fail(e.what(), name);
      }
      if (!at(Tok::kComma)) break;
      take();
    }
  }
  bool at_rel_decl() const { return peek().kind == Tok::kIdent && peek(1).kind == Tok::kSlash; }

  // ---- formulas ----
  // scope_ maps names to variable ids, innermost binding last. When
  // allow_free_ is set, unknown names become new free variables.
  std::vector<std::pair<std::string, int>> scope_;
  std::vector<std::string> names_;
  bool allow_free_ = false;
  bool allow_quantifiers_ = false;

  int new_var(const std::string& name) {
    names_.push_back(name);
    return static_cast<int>(names_.size()) - 1;
  }
  int resolve(const Token& t) {
    for (auto it = scope_.rbegin(); it != scope_.rend(); ++it) {
      if (it->first == t.text) return it->second;
    }
    if (!allow_free_) fail("unbound variable '" + t.text + "'", t);
    const int v = new_var(t.text);
    // Free variables live at the bottom of the scope so later binders shadow them.
    scope_.insert(scope_.begin(), {t.text, v});
    return v;
  }

  Formula formula() {
    if (at_ident("exists") || at_ident("forall")) return quantified();
    Formula lhs = disjunction();
    if (continue_with(Tok::kArrow)) {
      take();
      skip_newlines();
      Formula rhs = formula();
      return Formula::implies(std::move(lhs), std::move(rhs));
    }
    return lhs;
  }
  Formula quantified() {
    Token q = take();
    if (!allow_quantifiers_) fail("quantifier inside a quantifier-free matrix (sentence is not pithy)", q);
    std::vector<Token> vars;
    while (at(Tok::kIdent) && !is_keyword(peek().text)) vars.push_back(take());
    if (vars.empty()) fail("expected variable after quantifier", peek());
    std::vector<int> ids;
    for (const auto& v : vars) {
      ids.push_back(new_var(v.text));
      scope_.push_back({v.text, ids.back()});
    }
    Formula body;
    if (at_ident("exists") || at_ident("forall")) {
      body = quantified();
    } else {
      expect(Tok::kColon, "':'");
      skip_newlines();
      body = formula();
    }
    for (std::size_t i = 0; i < vars.size(); ++i) scope_.pop_back();
    const bool ex = q.text == "exists";
    for (auto it = ids.rbegin(); it != ids.rend(); ++it) {
      body = ex ? Formula::exists(*it, std::move(body)) : Formula::forall(*it, std::move(body));
    }
    return body;
  }
  Formula disjunction() {
    Formula lhs = conjunction();
    while (continue_with(Tok::kOr)) {
      take();
      skip_newlines();
      lhs = Formula::disj(std::move(lhs), conjunction());
    }
    return lhs;
  }
  Formula conjunction() {
    Formula lhs = unary();
    while (continue_with(Tok::kAnd)) {
      take();
      skip_newlines();
      lhs = Formula::conj(std::move(lhs), unary());
    }
    return lhs;
  }
  Formula unary() {
    if (at(Tok::kNot)) {
      take();
      return Formula::negate(unary());
    }
    if (at_ident("exists") || at_ident("forall")) return quantified();
    return primary();
  }
  Formula primary() {
    if (at(Tok::kLParen)) {
      take();
      Formula f = formula();
      expect(Tok::kRParen, "')'");
      return f;
    }
    Token name = expect(Tok::kIdent, "atom, equality or '('");
    if (name.text == "bigwedge" || name.text == "bigand") {
      fail("infinitary conjunctions are not supported", name);
    }
    if (is_keyword(name.text)) fail("unexpected keyword '" + name.text + "'", name);
    if (at(Tok::kEq) || at(Tok::kNeq)) {
      const bool neg = take().kind == Tok::kNeq;
      Token rhs = expect(Tok::kIdent, "variable");
      const int a = resolve(name);
      const int b = resolve(rhs);
      return neg ? Formula::neq(a, b) : Formula::eq(a, b);
    }
    auto rel = lang_.find(name.text);
    if (!rel) fail("unknown relation '" + name.text + "'", name);
    const int arity = lang_[*rel].arity;
    std::vector<int> args;
    if (at(Tok::kLParen)) {
      take();
      if (!at(Tok::kRParen)) {
        for (;;) {
          Token v = expect(Tok::kIdent, "variable");
          if (is_keyword(v.text)) fail("keyword used as variable", v);
          args.push_back(resolve(v));
          if (!at(Tok::kComma)) break;
          take();
        }
      }
      expect(Tok::kRParen, "')'");
    }
    if (static_cast<int>(args.size()) != arity) {
      fail("arity mismatch for '" + name.text + "': expected " + std::to_string(arity) + ", got " +
               std::to_string(args.size()),
           name);
    }
    return Formula::atom(*rel, std::move(args));
  }

  // forall v1..vk [exists w] : MATRIX   or   exists w : MATRIX
  PithySentence sentence() {
    PithySentence s;
    scope_.clear();
    names_.clear();
    allow_free_ = false;
    allow_quantifiers_ = false;
    Token head = take();
    bool have_witness = false;
    if (head.text == "forall") {
      while (at(Tok::kIdent) && !is_keyword(peek().text)) {
        Token v = take();
        s.universals.push_back(v.text);
      }
      if (s.universals.empty()) fail("expected variable after 'forall'", peek());
      if (at_ident("exists")) {
        take();
        have_witness = true;
      }
    } else {
      have_witness = true;
    }
    for (const auto& u : s.universals) scope_.push_back({u, new_var(u)});
    if (have_witness) {
      Token w = expect(Tok::kIdent, "witness variable");
      if (is_keyword(w.text)) fail("keyword used as variable", w);
      s.witness = w.text;
      if (at_ident("forall")) fail("quantifier alternation after the witness (sentence is not pithy)", peek());
      if (at(Tok::kIdent)) fail("pithy sentences have exactly one existential witness", peek());
    } else {
      s.witness = "w";
      for (int k = 1; std::find(s.universals.begin(), s.universals.end(), s.witness) != s.universals.end(); ++k) {
        s.witness = "w" + std::to_string(k);
      }
    }
    if (at_ident("forall")) fail("quantifier alternation after the witness (sentence is not pithy)", peek());
    const int w = new_var(s.witness);
    scope_.push_back({s.witness, w});
    expect(Tok::kColon, "':'");
    skip_newlines();
    s.matrix = formula();
    if (!have_witness) s.matrix = Formula::conj(std::move(s.matrix), Formula::eq(w, w));
    // Shadowed names would make the printed form ambiguous.
    for (std::size_t i = 0; i < names_.size(); ++i) {
      for (std::size_t j = i + 1; j < names_.size(); ++j) {
        if (names_[i] == names_[j]) fail("variable '" + names_[i] + "' bound twice", head);
      }
    }
    return s;
  }

  std::size_t pos_ = 0;
  std::vector<Token> toks_;
  RelationalLanguage& lang_;
};

}  // namespace

Theory parse_theory(std::string_view text) {
  Theory theory;
  Parser p(text, theory.language);
  for (;;) {
    p.skip_separators();
    if (p.at(Tok::kEnd)) break;
    if (p.at_ident("rel")) {
      p.take();
      p.parse_rel_decls();
    } else if (p.at_rel_decl()) {
      p.parse_rel_decls();
    } else if (p.at_ident("forall") || p.at_ident("exists")) {
      theory.sentences.push_back(p.sentence());
    } else {
      p.fail("expected 'rel', 'forall' or 'exists', found '" + p.peek().text + "'", p.peek());
    }
    p.end_statement();
  }
  return theory;
}

NamedFormula parse_formula(std::string_view text, const RelationalLanguage& language, bool allow_quantifiers) {
  RelationalLanguage lang = language;
  Parser p(text, lang);
  p.allow_free_ = true;
  p.allow_quantifiers_ = allow_quantifiers;
  p.skip_newlines();
  Formula f = p.formula();
  p.skip_separators();
  if (!p.at(Tok::kEnd)) p.fail("trailing input '" + p.peek().text + "'", p.peek());
  return {std::move(f), std::move(p.names_)};
}

std::vector<QfTypeSpec> parse_types(std::string_view text, RelationalLanguage& language) {
  std::vector<QfTypeSpec> out;
  Parser p(text, language);
  for (;;) {
    while (p.at(Tok::kNewline)) p.take();
    if (p.at(Tok::kEnd)) break;
    if (p.at_ident("rel")) {
      p.take();
      p.parse_rel_decls();
      if (p.at(Tok::kSemi)) p.take();
      continue;
    }
    if (!p.at_ident("type")) p.fail("expected 'type' or 'rel', found '" + p.peek().text + "'", p.peek());
    p.take();
    Token k = p.expect(Tok::kInt, "type arity");
    QfTypeSpec spec;
    spec.arity = std::stoi(k.text);
    if (spec.arity > kMaxArity) p.fail("type arity too large", k);
    p.expect(Tok::kColon, "':'");
    p.scope_.clear();
    p.names_.clear();
    p.allow_free_ = false;
    p.allow_quantifiers_ = false;
    for (int i = 0; i < spec.arity; ++i) p.scope_.push_back({"x" + std::to_string(i + 1), p.new_var("x" + std::to_string(i + 1))});
    for (;;) {
      spec.literals.push_back(p.formula());
      if (!p.at(Tok::kSemi)) break;
      p.take();
      if (p.at(Tok::kNewline) || p.at(Tok::kEnd)) break;
    }
    if (!p.at(Tok::kNewline) && !p.at(Tok::kEnd)) p.fail("expected end of type line", p.peek());
    out.push_back(std::move(spec));
  }
  return out;
}

FragmentSource parse_fragment_source(std::string_view text) {
  FragmentSource src;
  Parser p(text, src.language);
  for (;;) {
    p.skip_separators();
    if (p.at(Tok::kEnd)) break;
    if (p.at_ident("rel")) {
      p.take();
      p.parse_rel_decls();
      p.end_statement();
      continue;
    }
    bool axiom = false;
    if (p.at_ident("axiom")) {
      p.take();
      axiom = true;
    }
    p.scope_.clear();
    p.names_.clear();
    p.allow_free_ = true;
    p.allow_quantifiers_ = true;
    Formula f = p.formula();
    p.end_statement();
    NamedFormula nf{std::move(f), p.names_};
    if (axiom) {
      if (!nf.free_variables().empty()) p.fail("axiom must be a sentence", p.peek());
      src.axioms.push_back(nf);
    }
    src.formulas.push_back(std::move(nf));
  }
  return src;
}

// ---- Printing ----

namespace {

enum Prec { kQuant = 0, kImp = 1, kOr = 2, kAndP = 3, kUnary = 4, kAtomP = 5 };

void print_rec(std::ostream& os, const Formula& f, const RelationalLanguage& lang,
               const std::vector<std::string>& names, int ctx);

void wrap(std::ostream& os, int own, int ctx, const std::function<void()>& body) {
  if (own < ctx) os << "(";
  body();
  if (own < ctx) os << ")";
}

void print_rec(std::ostream& os, const Formula& f, const RelationalLanguage& lang,
               const std::vector<std::string>& names, int ctx) {
  switch (f.kind) {
    case NodeKind::kAtom: {
      os << lang[f.relation].name << "(";
      for (std::size_t i = 0; i < f.vars.size(); ++i) os << (i ? "," : "") << names.at(f.vars[i]);
      os << ")";
      return;
    }
    case NodeKind::kEq:
      os << names.at(f.vars[0]) << "=" << names.at(f.vars[1]);
      return;
    case NodeKind::kExists:
      wrap(os, kQuant, ctx, [&] {
        os << "exists " << names.at(f.vars[0]) << " : ";
        print_rec(os, f.children[0], lang, names, kQuant);
      });
      return;
    case NodeKind::kAnd:
      wrap(os, kAndP, ctx, [&] {
        print_rec(os, f.children[0], lang, names, kAndP);
        os << " & ";
        print_rec(os, f.children[1], lang, names, kUnary);
      });
      return;
    case NodeKind::kNot: {
      const Formula& c = f.children[0];
      if (c.kind == NodeKind::kEq) {
        os << names.at(c.vars[0]) << " != " << names.at(c.vars[1]);
        return;
      }
      if (c.kind == NodeKind::kAnd && c.children[0].kind == NodeKind::kNot &&
          c.children[1].kind == NodeKind::kNot) {
        wrap(os, kOr, ctx, [&] {
          print_rec(os, c.children[0].children[0], lang, names, kOr);
          os << " | ";
          print_rec(os, c.children[1].children[0], lang, names, kAndP);
        });
        return;
      }
      if (c.kind == NodeKind::kAnd && c.children[1].kind == NodeKind::kNot) {
        wrap(os, kImp, ctx, [&] {
          print_rec(os, c.children[0], lang, names, kOr);
          os << " -> ";
          print_rec(os, c.children[1].children[0], lang, names, kImp);
        });
        return;
      }
      if (c.kind == NodeKind::kExists && c.children[0].kind == NodeKind::kNot) {
        wrap(os, kQuant, ctx, [&] {
          os << "forall " << names.at(c.vars[0]) << " : ";
          print_rec(os, c.children[0].children[0], lang, names, kQuant);
        });
        return;
      }
      os << "!";
      print_rec(os, c, lang, names, kUnary);
      return;
    }
  }
}

}  // namespace

std::string print_formula(const Formula& f, const RelationalLanguage& language,
                          const std::vector<std::string>& names) {
  std::ostringstream os;
  print_rec(os, f, language, names, kQuant);
  return os.str();
}

std::string print_sentence(const PithySentence& s, const RelationalLanguage& language) {
  std::ostringstream os;
  if (!s.universals.empty()) {
    os << "forall";
    for (const auto& u : s.universals) os << " " << u;
    os << " ";
  }
  os << "exists " << s.witness << " : " << print_formula(s.matrix, language, s.names());
  return os.str();
}

std::string print_theory(const Theory& theory) {
  std::ostringstream os;
  if (!theory.language.empty()) {
    os << "rel ";
    for (int i = 0; i < theory.language.size(); ++i) {
      os << (i ? ", " : "") << theory.language[i].name << "/" << theory.language[i].arity;
    }
    os << ";\n";
  }
  for (const auto& s : theory.sentences) os << print_sentence(s, theory.language) << ";\n";
  return os.str();
}

std::string print_type(const QfTypeSpec& type, const RelationalLanguage& language) {
  std::vector<std::string> names;
  for (int i = 0; i < type.arity; ++i) names.push_back("x" + std::to_string(i + 1));
  std::ostringstream os;
  os << "type " << type.arity << " : ";
  for (std::size_t i = 0; i < type.literals.size(); ++i) {
    os << (i ? "; " : "") << print_formula(type.literals[i], language, names);
  }
  return os.str();
}

}  // namespace layerlimit
