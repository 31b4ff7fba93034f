#ifndef STREAK_QUERY_HPP
#define STREAK_QUERY_HPP

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "streak/core.hpp"

namespace streak {

// --- rank expressions --------------------------------------------------------

struct Interval {
  double lo = 0, hi = 0;
};

/// Ranking expression over numeric variables. Function applications are
/// uninterpreted monotone wrappers and evaluate as identity.
struct RankExpr {
  enum class Op : uint8_t { Var, Const, Add, Sub, Mul, Div, Neg, Call };
  Op op = Op::Const;
  std::string var;  // Op::Var
  double value = 0; // Op::Const
  std::string fn;   // Op::Call
  std::vector<RankExpr> kids;

  bool operator==(const RankExpr&) const = default;

  void collectVars(std::vector<std::string>& out) const {
    if (op == Op::Var) out.push_back(var);
    for (const RankExpr& k : kids) k.collectVars(out);
  }

  template <typename Lookup>
  double eval(Lookup&& valueOf) const {
    switch (op) {
      case Op::Var: return valueOf(var);
      case Op::Const: return value;
      case Op::Add: return kids[0].eval(valueOf) + kids[1].eval(valueOf);
      case Op::Sub: return kids[0].eval(valueOf) - kids[1].eval(valueOf);
      case Op::Mul: return kids[0].eval(valueOf) * kids[1].eval(valueOf);
      case Op::Div: return kids[0].eval(valueOf) / kids[1].eval(valueOf);
      case Op::Neg: return -kids[0].eval(valueOf);
      case Op::Call: return kids[0].eval(valueOf);
    }
    return 0;
  }

  /// Conservative interval evaluation (exact for the +,-,*,/,neg algebra).
  template <typename Lookup>
  Interval evalInterval(Lookup&& intervalOf) const {
    auto combine = [](Interval a, Interval b, auto f) {
      double c[4] = {f(a.lo, b.lo), f(a.lo, b.hi), f(a.hi, b.lo), f(a.hi, b.hi)};
      Interval out{c[0], c[0]};
      for (double v : c) {
        out.lo = std::min(out.lo, v);
        out.hi = std::max(out.hi, v);
      }
      return out;
    };
    switch (op) {
      case Op::Var: return intervalOf(var);
      case Op::Const: return {value, value};
      case Op::Add: {
        Interval a = kids[0].evalInterval(intervalOf), b = kids[1].evalInterval(intervalOf);
        return {a.lo + b.lo, a.hi + b.hi};
      }
      case Op::Sub: {
        Interval a = kids[0].evalInterval(intervalOf), b = kids[1].evalInterval(intervalOf);
        return {a.lo - b.hi, a.hi - b.lo};
      }
      case Op::Mul:
        return combine(kids[0].evalInterval(intervalOf), kids[1].evalInterval(intervalOf),
                       [](double x, double y) { return x * y; });
      case Op::Div:
        return combine(kids[0].evalInterval(intervalOf), kids[1].evalInterval(intervalOf),
                       [](double x, double y) { return x / y; });
      case Op::Neg: {
        Interval a = kids[0].evalInterval(intervalOf);
        return {-a.hi, -a.lo};
      }
      case Op::Call: return kids[0].evalInterval(intervalOf);
    }
    return {};
  }
};

// --- patterns ----------------------------------------------------------------

struct PatternSlot {
  enum class Kind : uint8_t { Absent, Var, Constant };
  Kind kind = Kind::Absent;
  std::string var;  // "?name"
  Term term;

  static PatternSlot variable(std::string name) {
    PatternSlot s;
    s.kind = Kind::Var;
    s.var = std::move(name);
    return s;
  }
  static PatternSlot constant(Term t) {
    PatternSlot s;
    s.kind = Kind::Constant;
    s.term = std::move(t);
    return s;
  }

  bool isVar() const { return kind == Kind::Var; }
  bool isConst() const { return kind == Kind::Constant; }

  bool operator==(const PatternSlot& o) const {
    if (kind != o.kind) return false;
    if (kind == Kind::Var) return var == o.var;
    if (kind == Kind::Constant)
      return term.kind == o.term.kind && term.lexical == o.term.lexical;
    return true;
  }
};

/// Triple pattern; reified groups are fused so `reif` names the fact id slot.
struct TriplePattern {
  PatternSlot reif, s, p, o;
  bool operator==(const TriplePattern&) const = default;
};

struct DistanceFilter {
  std::string varA, varB;  // geometry literal variables
  double threshold = 0;
  bool operator==(const DistanceFilter&) const = default;
};

struct Query {
  std::vector<std::string> projection;
  std::optional<std::string> rankAlias;  // SELECT ((expr) AS ?alias)
  std::optional<RankExpr> rankAliasExpr;
  std::vector<TriplePattern> patterns;  // post-fusion, in query order
  size_t rawPatternCount = 0;
  DistanceFilter filter;
  RankExpr rank;  // resolved ranking expression
  bool asc = false;
  int64_t k = 0;
  bool symbolicK = false;  // LIMIT k — resolved by the caller

  bool operator==(const Query&) const = default;
};

inline constexpr std::string_view kRdfNs = "http://www.w3.org/1999/02/22-rdf-syntax-ns#";

// --- tokenizer ---------------------------------------------------------------

namespace detail {

struct QToken {
  enum class Kind : uint8_t {
    Var, Iri, Pname, Ident, Number, String, LParen, RParen, LBrace, RBrace,
    Dot, Comma, Less, Greater, Plus, Minus, Star, Slash, End,
  };
  Kind kind = Kind::End;
  std::string text;      // payload without decoration
  std::string datatype;  // strings only
  int line = 1, col = 1;
};

class QLexer {
 public:
  explicit QLexer(std::string_view text) : text_(text) { advance(); }

  const QToken& peek() const { return tok_; }

  QToken take() {
    QToken t = tok_;
    advance();
    return t;
  }

  [[noreturn]] void err(const std::string& what) const {
    fail(Err::QuerySyntax, "query syntax error at " + std::to_string(tok_.line) + ':' +
                               std::to_string(tok_.col) + ": " + what);
  }

 private:
  std::string_view text_;
  size_t pos_ = 0;
  int line_ = 1, col_ = 1;
  QToken tok_;

  char cur() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

  void bump() {
    if (cur() == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void advance() {
    while (pos_ < text_.size() &&
           (std::isspace(static_cast<unsigned char>(cur())) || cur() == ';'))
      bump();
    tok_ = QToken{};
    tok_.line = line_;
    tok_.col = col_;
    if (pos_ >= text_.size()) return;
    char c = cur();
    auto single = [&](QToken::Kind k) {
      tok_.kind = k;
      tok_.text = c;
      bump();
    };
    switch (c) {
      case '(': single(QToken::Kind::LParen); return;
      case ')': single(QToken::Kind::RParen); return;
      case '{': single(QToken::Kind::LBrace); return;
      case '}': single(QToken::Kind::RBrace); return;
      case ',': single(QToken::Kind::Comma); return;
      case '>': single(QToken::Kind::Greater); return;
      case '+': single(QToken::Kind::Plus); return;
      case '*': single(QToken::Kind::Star); return;
      case '/': single(QToken::Kind::Slash); return;
    }
    if (c == '.' && !std::isdigit(static_cast<unsigned char>(peekAt(1)))) {
      single(QToken::Kind::Dot);
      return;
    }
    if (c == '-' && !std::isdigit(static_cast<unsigned char>(peekAt(1)))) {
      single(QToken::Kind::Minus);
      return;
    }
    if (c == '<') {
      // IRIREF when '>' appears before any whitespace, else a comparison.
      size_t scan = pos_ + 1;
      while (scan < text_.size() && !std::isspace(static_cast<unsigned char>(text_[scan])) &&
             text_[scan] != '>')
        ++scan;
      if (scan < text_.size() && text_[scan] == '>') {
        tok_.kind = QToken::Kind::Iri;
        tok_.text = std::string(text_.substr(pos_ + 1, scan - pos_ - 1));
        while (pos_ <= scan) bump();
        return;
      }
      single(QToken::Kind::Less);
      return;
    }
    if (c == '?') {
      bump();
      std::string name = "?";
      while (std::isalnum(static_cast<unsigned char>(cur())) || cur() == '_') {
        name += cur();
        bump();
      }
      if (name.size() == 1) err("expected variable name after '?'");
      tok_.kind = QToken::Kind::Var;
      tok_.text = std::move(name);
      return;
    }
    if (c == '"') {
      bump();
      std::string value;
      while (cur() != '"' && pos_ < text_.size()) {
        if (cur() == '\\') bump();
        value += cur();
        bump();
      }
      if (pos_ >= text_.size()) err("unterminated string literal");
      bump();
      tok_.kind = QToken::Kind::String;
      tok_.text = std::move(value);
      if (cur() == '^' && peekAt(1) == '^') {
        bump();
        bump();
        if (cur() == '<') {
          bump();
          while (cur() != '>' && pos_ < text_.size()) {
            tok_.datatype += cur();
            bump();
          }
          if (pos_ >= text_.size()) err("unterminated datatype IRI");
          bump();
        } else {
          while (std::isalnum(static_cast<unsigned char>(cur())) || cur() == ':' || cur() == '_') {
            tok_.datatype += cur();
            bump();
          }
        }
      }
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        ((c == '-' || c == '.') && std::isdigit(static_cast<unsigned char>(peekAt(1))))) {
      std::string num;
      if (c == '-') {
        num += '-';
        bump();
      }
      while (std::isdigit(static_cast<unsigned char>(cur())) || cur() == '.' || cur() == 'e' ||
             cur() == 'E' ||
             ((cur() == '+' || cur() == '-') && (num.back() == 'e' || num.back() == 'E'))) {
        num += cur();
        bump();
      }
      tok_.kind = QToken::Kind::Number;
      tok_.text = std::move(num);
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == ':') {
      std::string word;
      while (std::isalnum(static_cast<unsigned char>(cur())) || cur() == '_' || cur() == ':' ||
             cur() == '.' || cur() == '-') {
        word += cur();
        bump();
      }
      // A trailing '.' is the statement terminator, not part of the name.
      while (!word.empty() && word.back() == '.') {
        word.pop_back();
        --pos_;
        --col_;
      }
      tok_.kind = word.find(':') != std::string::npos ? QToken::Kind::Pname : QToken::Kind::Ident;
      tok_.text = std::move(word);
      return;
    }
    err(std::string("unexpected character '") + c + "'");
  }

  char peekAt(size_t offset) const {
    return pos_ + offset < text_.size() ? text_[pos_ + offset] : '\0';
  }
};

inline bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i)
    if (std::tolower(static_cast<unsigned char>(a[i])) !=
        std::tolower(static_cast<unsigned char>(b[i])))
      return false;
  return true;
}

}  // namespace detail

// --- parser ------------------------------------------------------------------

namespace detail {

class QueryParser {
 public:
  explicit QueryParser(std::string_view text) : lex_(text) {
    prefixes_["rdf"] = std::string(kRdfNs);  // predeclared RDF vocabulary
  }

  Query parse() {
    parsePrologue();
    expectKeyword("SELECT");
    parseProjection();
    expectKeyword("WHERE");
    expect(QToken::Kind::LBrace, "'{'");
    parseGroup();
    expectKeyword("ORDER");
    expectKeyword("BY");
    parseOrderBy();
    expectKeyword("LIMIT");
    parseLimit();
    if (lex_.peek().kind != QToken::Kind::End) lex_.err("trailing tokens after LIMIT");
    return finish();
  }

 private:
  QLexer lex_;
  std::map<std::string, std::string> prefixes_;
  std::string base_;
  Query q_;
  std::vector<TriplePattern> raw_;
  std::vector<DistanceFilter> filters_;
  std::optional<RankExpr> orderExpr_;

  bool peekKeyword(std::string_view kw) const {
    return lex_.peek().kind == QToken::Kind::Ident && iequals(lex_.peek().text, kw);
  }

  void expectKeyword(std::string_view kw) {
    if (!peekKeyword(kw)) lex_.err("expected " + std::string(kw));
    lex_.take();
  }

  QToken expect(QToken::Kind kind, const std::string& what) {
    if (lex_.peek().kind != kind) lex_.err("expected " + what);
    return lex_.take();
  }

  std::string expandPname(const std::string& pname) {
    size_t colon = pname.find(':');
    std::string prefix = pname.substr(0, colon);
    auto it = prefixes_.find(prefix);
    if (it == prefixes_.end()) return pname;  // undeclared prefixes stay verbatim
    return it->second + pname.substr(colon + 1);
  }

  std::string resolveIri(const std::string& iri) {
    if (!base_.empty() && iri.find("://") == std::string::npos) return base_ + iri;
    return iri;
  }

  void parsePrologue() {
    for (;;) {
      if (peekKeyword("PREFIX")) {
        lex_.take();
        QToken name = lex_.take();
        std::string prefix = name.text;
        if (!prefix.empty() && prefix.back() == ':') prefix.pop_back();
        QToken iri = expect(QToken::Kind::Iri, "IRI in PREFIX");
        prefixes_[prefix] = iri.text;
        continue;
      }
      if (peekKeyword("BASE")) {
        lex_.take();
        QToken iri = expect(QToken::Kind::Iri, "IRI in BASE");
        base_ = iri.text;
        if (lex_.peek().kind == QToken::Kind::Dot) lex_.take();
        continue;
      }
      break;
    }
  }

  void parseProjection() {
    bool any = false;
    for (;;) {
      if (lex_.peek().kind == QToken::Kind::Var) {
        q_.projection.push_back(lex_.take().text);
        any = true;
        continue;
      }
      if (lex_.peek().kind == QToken::Kind::LParen) {
        // ((expr) AS ?alias)
        lex_.take();
        RankExpr e = parseExpr();
        expectKeyword("AS");
        QToken alias = expect(QToken::Kind::Var, "alias variable");
        expect(QToken::Kind::RParen, "')'");
        q_.rankAlias = alias.text;
        q_.rankAliasExpr = std::move(e);
        continue;
      }
      break;
    }
    if (!any) lex_.err("SELECT needs at least one variable");
  }

  PatternSlot parseTermSlot() {
    const QToken& t = lex_.peek();
    switch (t.kind) {
      case QToken::Kind::Var:
        return PatternSlot::variable(lex_.take().text);
      case QToken::Kind::Iri:
        return PatternSlot::constant(Term::iri(resolveIri(lex_.take().text)));
      case QToken::Kind::Pname:
        return PatternSlot::constant(Term::iri(expandPname(lex_.take().text)));
      case QToken::Kind::Number: {
        QToken n = lex_.take();
        return PatternSlot::constant(Term::numeric(n.text, std::strtod(n.text.c_str(), nullptr)));
      }
      case QToken::Kind::String: {
        QToken s = lex_.take();
        if (local_name(s.datatype.empty() ? "" : expandPname(s.datatype)) == "double")
          return PatternSlot::constant(Term::numeric(s.text, std::strtod(s.text.c_str(), nullptr)));
        return PatternSlot::constant(Term::str(s.text));
      }
      default:
        lex_.err("expected a term");
    }
  }

  void parseGroup() {
    for (;;) {
      if (lex_.peek().kind == QToken::Kind::RBrace) {
        lex_.take();
        return;
      }
      if (peekKeyword("FILTER")) {
        lex_.take();
        parseFilter();
        if (lex_.peek().kind == QToken::Kind::Dot) lex_.take();
        continue;
      }
      TriplePattern p;
      p.s = parseTermSlot();
      p.p = parseTermSlot();
      p.o = parseTermSlot();
      expect(QToken::Kind::Dot, "'.' after triple pattern");
      raw_.push_back(std::move(p));
    }
  }

  double parseThreshold() {
    const QToken& t = lex_.peek();
    if (t.kind == QToken::Kind::Number) return std::strtod(lex_.take().text.c_str(), nullptr);
    if (t.kind == QToken::Kind::String) {
      QToken s = lex_.take();
      char* end = nullptr;
      double v = std::strtod(s.text.c_str(), &end);
      if (end != s.text.c_str() + s.text.size()) lex_.err("distance threshold must be numeric");
      return v;
    }
    lex_.err("expected distance threshold");
  }

  void parseFilter() {
    expect(QToken::Kind::LParen, "'(' after FILTER");
    DistanceFilter f;
    if (lex_.peek().kind == QToken::Kind::Ident && iequals(lex_.peek().text, "distance")) {
      lex_.take();
      expect(QToken::Kind::LParen, "'('");
      f.varA = expect(QToken::Kind::Var, "geometry variable").text;
      expect(QToken::Kind::Comma, "','");
      f.varB = expect(QToken::Kind::Var, "geometry variable").text;
      expect(QToken::Kind::RParen, "')'");
    } else if (lex_.peek().kind == QToken::Kind::LParen) {
      // (?a, ?b) < d  — normalized to distance(?a, ?b) < d
      lex_.take();
      f.varA = expect(QToken::Kind::Var, "geometry variable").text;
      expect(QToken::Kind::Comma, "','");
      f.varB = expect(QToken::Kind::Var, "geometry variable").text;
      expect(QToken::Kind::RParen, "')'");
    } else {
      lex_.err("expected distance(...) or (?a, ?b) in FILTER");
    }
    expect(QToken::Kind::Less, "'<'");
    f.threshold = parseThreshold();
    expect(QToken::Kind::RParen, "')' closing FILTER");
    filters_.push_back(std::move(f));
  }

  // expr := mul (('+'|'-') mul)* ; mul := unary (('*'|'/') unary)* ;
  // unary := ('+'|'-')* primary ; primary := var | number | ident '(' expr ')' | '(' expr ')'
  RankExpr parseExpr() {
    RankExpr left = parseMul();
    for (;;) {
      if (lex_.peek().kind == QToken::Kind::Plus || lex_.peek().kind == QToken::Kind::Minus) {
        bool add = lex_.take().kind == QToken::Kind::Plus;
        RankExpr right = parseMul();
        RankExpr parent;
        parent.op = add ? RankExpr::Op::Add : RankExpr::Op::Sub;
        parent.kids = {std::move(left), std::move(right)};
        left = std::move(parent);
        continue;
      }
      return left;
    }
  }

  RankExpr parseMul() {
    RankExpr left = parseUnary();
    for (;;) {
      if (lex_.peek().kind == QToken::Kind::Star || lex_.peek().kind == QToken::Kind::Slash) {
        bool mul = lex_.take().kind == QToken::Kind::Star;
        RankExpr right = parseUnary();
        RankExpr parent;
        parent.op = mul ? RankExpr::Op::Mul : RankExpr::Op::Div;
        parent.kids = {std::move(left), std::move(right)};
        left = std::move(parent);
        continue;
      }
      return left;
    }
  }

  RankExpr parseUnary() {
    if (lex_.peek().kind == QToken::Kind::Plus) {
      lex_.take();
      return parseUnary();
    }
    if (lex_.peek().kind == QToken::Kind::Minus) {
      lex_.take();
      RankExpr e;
      e.op = RankExpr::Op::Neg;
      e.kids.push_back(parseUnary());
      return e;
    }
    return parsePrimary();
  }

  RankExpr parsePrimary() {
    const QToken& t = lex_.peek();
    if (t.kind == QToken::Kind::Var) {
      RankExpr e;
      e.op = RankExpr::Op::Var;
      e.var = lex_.take().text;
      return e;
    }
    if (t.kind == QToken::Kind::Number) {
      RankExpr e;
      e.op = RankExpr::Op::Const;
      e.value = std::strtod(lex_.take().text.c_str(), nullptr);
      return e;
    }
    if (t.kind == QToken::Kind::Ident) {
      RankExpr e;
      e.op = RankExpr::Op::Call;
      e.fn = lex_.take().text;
      expect(QToken::Kind::LParen, "'(' after function name");
      e.kids.push_back(parseExpr());
      expect(QToken::Kind::RParen, "')'");
      return e;
    }
    if (t.kind == QToken::Kind::LParen) {
      lex_.take();
      RankExpr e = parseExpr();
      expect(QToken::Kind::RParen, "')'");
      return e;
    }
    lex_.err("expected ranking expression");
  }

  void parseOrderBy() {
    bool asc;
    if (peekKeyword("ASC")) asc = true;
    else if (peekKeyword("DESC")) asc = false;
    else lex_.err("expected ASC or DESC");
    lex_.take();
    q_.asc = asc;
    expect(QToken::Kind::LParen, "'(' after ASC/DESC");
    RankExpr e = parseExpr();
    // Juxtaposed groups like ASC((..a..) (..b..)) normalize to a sum.
    while (lex_.peek().kind == QToken::Kind::LParen) {
      lex_.take();
      RankExpr extra = parseExpr();
      expect(QToken::Kind::RParen, "')'");
      RankExpr sum;
      sum.op = RankExpr::Op::Add;
      sum.kids = {std::move(e), std::move(extra)};
      e = std::move(sum);
    }
    expect(QToken::Kind::RParen, "')' closing ORDER BY");
    orderExpr_ = std::move(e);
  }

  void parseLimit() {
    const QToken& t = lex_.peek();
    if (t.kind == QToken::Kind::Number) {
      q_.k = static_cast<int64_t>(std::strtod(lex_.take().text.c_str(), nullptr));
      if (q_.k < 1) lex_.err("LIMIT must be at least 1");
      return;
    }
    if (t.kind == QToken::Kind::Ident && iequals(t.text, "k")) {
      lex_.take();
      q_.symbolicK = true;
      q_.k = 0;
      return;
    }
    lex_.err("expected LIMIT count");
  }

  static bool isRdfReificationPred(const PatternSlot& p, std::string_view which) {
    return p.isConst() && p.term.kind == TermKind::Iri &&
           p.term.lexical == std::string(kRdfNs) + std::string(which);
  }

  void fuseReification() {
    q_.rawPatternCount = raw_.size();
    struct Group {
      std::optional<PatternSlot> s, p, o;
      int firstIndex = -1;
    };
    std::map<std::string, Group> groups;
    for (size_t i = 0; i < raw_.size(); ++i) {
      const TriplePattern& t = raw_[i];
      if (!t.s.isVar()) continue;
      const char* which = nullptr;
      if (isRdfReificationPred(t.p, "subject")) which = "s";
      else if (isRdfReificationPred(t.p, "predicate")) which = "p";
      else if (isRdfReificationPred(t.p, "object")) which = "o";
      if (!which) continue;
      Group& g = groups[t.s.var];
      if (g.firstIndex < 0) g.firstIndex = static_cast<int>(i);
      auto& slot = *which == 's' ? g.s : *which == 'p' ? g.p : g.o;
      if (slot.has_value())
        fail(Err::QuerySyntax, "duplicate rdf:" + std::string(*which == 's' ? "subject"
                                                              : *which == 'p' ? "predicate"
                                                                              : "object") +
                                   " for " + t.s.var);
      slot = t.o;
    }
    for (auto& [var, g] : groups) {
      if (!g.s || !g.p || !g.o)
        fail(Err::QuerySyntax, "incomplete reification group for " + var);
    }
    for (size_t i = 0; i < raw_.size(); ++i) {
      const TriplePattern& t = raw_[i];
      bool isReifPattern =
          t.s.isVar() && groups.count(t.s.var) &&
          (isRdfReificationPred(t.p, "subject") || isRdfReificationPred(t.p, "predicate") ||
           isRdfReificationPred(t.p, "object"));
      if (!isReifPattern) {
        q_.patterns.push_back(t);
        continue;
      }
      const Group& g = groups.at(t.s.var);
      if (static_cast<int>(i) != g.firstIndex) continue;  // emit the fused pattern once
      TriplePattern fused;
      fused.reif = PatternSlot::variable(t.s.var);
      fused.s = *g.s;
      fused.p = *g.p;
      fused.o = *g.o;
      q_.patterns.push_back(std::move(fused));
    }
  }

  void validate() {
    if (filters_.empty()) fail(Err::QuerySyntax, "query needs exactly one DISTANCE filter");
    if (filters_.size() > 1)
      fail(Err::MultipleSpatialFilters, "only one DISTANCE filter is supported");
    q_.filter = filters_[0];

    if (!orderExpr_) fail(Err::QuerySyntax, "missing ORDER BY expression");
    // ORDER BY over the SELECT alias resolves to the aliased expression.
    if (orderExpr_->op == RankExpr::Op::Var && q_.rankAlias &&
        orderExpr_->var == *q_.rankAlias) {
      q_.rank = *q_.rankAliasExpr;
    } else {
      q_.rank = *orderExpr_;
    }

    auto boundAsObject = [&](const std::string& var) {
      for (const TriplePattern& t : q_.patterns)
        if (t.o.isVar() && t.o.var == var) return true;
      return false;
    };
    auto boundAnywhere = [&](const std::string& var) {
      for (const TriplePattern& t : q_.patterns) {
        for (const PatternSlot* s : {&t.reif, &t.s, &t.p, &t.o})
          if (s->isVar() && s->var == var) return true;
      }
      return false;
    };

    std::vector<std::string> rankVars;
    q_.rank.collectVars(rankVars);
    for (const std::string& v : rankVars)
      if (!boundAsObject(v))
        fail(Err::UnboundRankVariable, v + " is not bound by any quantifiable pattern");

    for (const std::string& v : {q_.filter.varA, q_.filter.varB}) {
      bool ok = false;
      for (const TriplePattern& t : q_.patterns) {
        if (t.o.isVar() && t.o.var == v && t.p.isConst() &&
            local_name(t.p.term.lexical) == "hasGeometry") {
          ok = true;
          break;
        }
      }
      if (!ok) fail(Err::MissingGeometryBinding, v + " is not bound by a hasGeometry pattern");
    }

    for (const std::string& v : q_.projection)
      if (!boundAnywhere(v)) fail(Err::QuerySyntax, "projected variable " + v + " is unbound");
  }

  Query finish() {
    fuseReification();
    validate();
    return std::move(q_);
  }
};

}  // namespace detail

inline Query parse_query(std::string_view text) { return detail::QueryParser(text).parse(); }

// --- unparse (pretty printer) --------------------------------------------------

namespace detail {

inline void printExpr(std::string& out, const RankExpr& e) {
  switch (e.op) {
    case RankExpr::Op::Var: out += e.var; return;
    case RankExpr::Op::Const: {
      char buf[64];
      snprintf(buf, sizeof buf, "%g", e.value);
      out += buf;
      return;
    }
    case RankExpr::Op::Add:
    case RankExpr::Op::Sub:
    case RankExpr::Op::Mul:
    case RankExpr::Op::Div: {
      const char* op = e.op == RankExpr::Op::Add   ? " + "
                       : e.op == RankExpr::Op::Sub ? " - "
                       : e.op == RankExpr::Op::Mul ? " * "
                                                   : " / ";
      out += '(';
      printExpr(out, e.kids[0]);
      out += op;
      printExpr(out, e.kids[1]);
      out += ')';
      return;
    }
    case RankExpr::Op::Neg:
      out += "(-";
      printExpr(out, e.kids[0]);
      out += ')';
      return;
    case RankExpr::Op::Call:
      out += e.fn;
      out += '(';
      printExpr(out, e.kids[0]);
      out += ')';
      return;
  }
}

inline void printSlot(std::string& out, const PatternSlot& s) {
  if (s.isVar()) {
    out += s.var;
    return;
  }
  const Term& t = s.term;
  switch (t.kind) {
    case TermKind::Iri:
      if (!t.lexical.empty() && t.lexical[0] == ':') out += t.lexical;
      else if (!t.lexical.empty() && t.lexical[0] == '?') out += t.lexical;
      else {
        out += '<';
        out += t.lexical;
        out += '>';
      }
      return;
    case TermKind::NumericLit: {
      char buf[64];
      snprintf(buf, sizeof buf, "%g", t.number);
      out += buf;
      return;
    }
    default:
      out += '"';
      out += t.lexical;
      out += '"';
      return;
  }
}

}  // namespace detail

/// Prints the analyzed query back to the subset grammar. Reified groups are
/// expanded to rdf:subject/predicate/object triples so the output re-parses
/// to an identical AST.
inline std::string unparse(const Query& q) {
  std::string out = "SELECT";
  for (const std::string& v : q.projection) {
    out += ' ';
    out += v;
  }
  if (q.rankAlias) {
    out += " ((";
    detail::printExpr(out, *q.rankAliasExpr);
    out += ") AS " + *q.rankAlias + ")";
  }
  out += "\nWHERE {\n";
  int reifCounter = 0;
  (void)reifCounter;
  for (const TriplePattern& t : q.patterns) {
    if (t.reif.kind != PatternSlot::Kind::Absent) {
      std::string rv = t.reif.var;
      out += "  " + rv + " <" + std::string(kRdfNs) + "subject> ";
      detail::printSlot(out, t.s);
      out += ".\n";
      out += "  " + rv + " <" + std::string(kRdfNs) + "predicate> ";
      detail::printSlot(out, t.p);
      out += ".\n";
      out += "  " + rv + " <" + std::string(kRdfNs) + "object> ";
      detail::printSlot(out, t.o);
      out += ".\n";
      continue;
    }
    out += "  ";
    detail::printSlot(out, t.s);
    out += ' ';
    detail::printSlot(out, t.p);
    out += ' ';
    detail::printSlot(out, t.o);
    out += ".\n";
  }
  char buf[64];
  snprintf(buf, sizeof buf, "%g", q.filter.threshold);
  out += "  FILTER(distance(" + q.filter.varA + "," + q.filter.varB + ") < " + buf + ")\n";
  out += "}\nORDER BY ";
  out += q.asc ? "ASC(" : "DESC(";
  std::string rankText;
  detail::printExpr(rankText, q.rank);
  out += rankText;
  out += ") LIMIT ";
  out += q.symbolicK ? "k" : std::to_string(q.k);
  out += "\n";
  return out;
}

// --- driver/driven split -------------------------------------------------------

/// One side of the spatial join.
struct SubQuery {
  std::vector<TriplePattern> patterns;  // original order
  std::string geoLiteralVar;            // the FILTER variable
  std::string geoSubjectVar;            // subject of its hasGeometry pattern
};

namespace detail {

inline void slotVars(const TriplePattern& t, std::vector<std::string>& out) {
  for (const PatternSlot* s : {&t.reif, &t.s, &t.p, &t.o})
    if (s->isVar()) out.push_back(s->var);
}

}  // namespace detail

/// Splits the pattern graph (minus the filter edge) into the two connected
/// components anchored at the filter's geometry variables. The pair is
/// (component of filter.varA, component of filter.varB); the planner decides
/// which one drives.
inline std::pair<SubQuery, SubQuery> split_driver_driven(const Query& q) {
  const size_t n = q.patterns.size();
  std::vector<int> comp(n, -1);
  std::map<std::string, std::vector<size_t>> byVar;
  for (size_t i = 0; i < n; ++i) {
    std::vector<std::string> vars;
    detail::slotVars(q.patterns[i], vars);
    for (auto& v : vars) byVar[v].push_back(i);
  }
  int nComp = 0;
  for (size_t seed = 0; seed < n; ++seed) {
    if (comp[seed] >= 0) continue;
    std::vector<size_t> stack{seed};
    comp[seed] = nComp;
    while (!stack.empty()) {
      size_t at = stack.back();
      stack.pop_back();
      std::vector<std::string> vars;
      detail::slotVars(q.patterns[at], vars);
      for (auto& v : vars)
        for (size_t other : byVar[v])
          if (comp[other] < 0) {
            comp[other] = nComp;
            stack.push_back(other);
          }
    }
    ++nComp;
  }
  if (nComp != 2)
    fail(Err::NotTwoComponents, "pattern graph splits into " + std::to_string(nComp) +
                                    " components; expected exactly 2");

  auto geoPatternOf = [&](const std::string& filterVar) -> size_t {
    for (size_t i = 0; i < n; ++i) {
      const TriplePattern& t = q.patterns[i];
      if (t.o.isVar() && t.o.var == filterVar && t.p.isConst() &&
          local_name(t.p.term.lexical) == "hasGeometry")
        return i;
    }
    fail(Err::MissingGeometryBinding, filterVar + " has no hasGeometry pattern");
  };
  size_t ga = geoPatternOf(q.filter.varA);
  size_t gb = geoPatternOf(q.filter.varB);
  if (comp[ga] == comp[gb])
    fail(Err::NotTwoComponents, "both filter variables live in one component");

  auto build = [&](const std::string& filterVar, size_t geoIdx) {
    SubQuery sub;
    sub.geoLiteralVar = filterVar;
    const TriplePattern& g = q.patterns[geoIdx];
    if (!g.s.isVar())
      fail(Err::MissingGeometryBinding, "hasGeometry subject must be a variable");
    sub.geoSubjectVar = g.s.var;
    for (size_t i = 0; i < n; ++i)
      if (comp[i] == comp[geoIdx]) sub.patterns.push_back(q.patterns[i]);
    return sub;
  };
  return {build(q.filter.varA, ga), build(q.filter.varB, gb)};
}

}  // namespace streak

#endif
