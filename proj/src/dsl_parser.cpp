#include "scendbg/dsl/parser.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "scendbg/dsl/catalog.hpp"
#include "scendbg/errors.hpp"

namespace scendbg::dsl {

namespace {

enum class Tok {
  Ident,
  Number,
  String,
  Newline,
  End,
  LParen,
  RParen,
  LBrace,
  RBrace,
  Comma,
  Colon,
  Dot,
  Assign,  // =
  Plus,
  Minus,
  Star,
  Slash,
  Lt,
  Le,
  Gt,
  Ge,
  EqEq,
  Ne,
};

struct Token {
  Tok kind;
  std::string text;
  double number = 0.0;
  int line = 1;
  int col = 1;
};

const std::unordered_set<std::string>& reserved_words() {
  static const std::unordered_set<std::string> words = {
      "param", "require", "car",  "uniform",     "range",       "choice",
      "and",   "in",      "dist", "headingDiff", "visibleFrom"};
  return words;
}

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> tokenize() {
    std::vector<Token> out;
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
        continue;
      }
      if (c == '\n') {
        out.push_back(make(Tok::Newline, "\n"));
        advance();
        ++line_;
        col_ = 1;
        continue;
      }
      if (c == ' ' || c == '\t' || c == '\r') {
        advance();
        continue;
      }
      if (std::isdigit(static_cast<unsigned char>(c))) {
        out.push_back(lex_number());
        continue;
      }
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        out.push_back(lex_ident());
        continue;
      }
      if (c == '"') {
        out.push_back(lex_string());
        continue;
      }
      out.push_back(lex_punct());
    }
    out.push_back(make(Tok::Newline, "\n"));
    out.push_back(make(Tok::End, ""));
    return out;
  }

 private:
  void advance() {
    ++pos_;
    ++col_;
  }

  Token make(Tok kind, std::string text) {
    Token t;
    t.kind = kind;
    t.text = std::move(text);
    t.line = line_;
    t.col = col_;
    return t;
  }

  Token lex_number() {
    std::size_t start = pos_;
    int col = col_;
    while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) advance();
    if (pos_ < src_.size() && src_[pos_] == '.') {
      advance();
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) advance();
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      advance();
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) advance();
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) advance();
    }
    std::string text(src_.substr(start, pos_ - start));
    Token t = make(Tok::Number, text);
    t.col = col;
    t.number = std::strtod(text.c_str(), nullptr);
    return t;
  }

  Token lex_ident() {
    std::size_t start = pos_;
    int col = col_;
    while (pos_ < src_.size() &&
           (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
      advance();
    Token t = make(Tok::Ident, std::string(src_.substr(start, pos_ - start)));
    t.col = col;
    return t;
  }

  Token lex_string() {
    int line = line_, col = col_;
    advance();  // opening quote
    std::string value;
    while (pos_ < src_.size() && src_[pos_] != '"') {
      char c = src_[pos_];
      if (c == '\n') throw SyntaxError("unterminated string", line, col);
      if (c == '\\' && pos_ + 1 < src_.size()) {
        advance();
        char esc = src_[pos_];
        if (esc == '"' || esc == '\\')
          value += esc;
        else
          throw SyntaxError(std::string("unsupported escape \\") + esc, line_, col_);
      } else {
        value += c;
      }
      advance();
    }
    if (pos_ >= src_.size()) throw SyntaxError("unterminated string", line, col);
    advance();  // closing quote
    Token t = make(Tok::String, value);
    t.line = line;
    t.col = col;
    return t;
  }

  Token lex_punct() {
    char c = src_[pos_];
    int col = col_;
    auto two = [&](char second) {
      return pos_ + 1 < src_.size() && src_[pos_ + 1] == second;
    };
    Token t;
    switch (c) {
      case '(': t = make(Tok::LParen, "("); break;
      case ')': t = make(Tok::RParen, ")"); break;
      case '{': t = make(Tok::LBrace, "{"); break;
      case '}': t = make(Tok::RBrace, "}"); break;
      case ',': t = make(Tok::Comma, ","); break;
      case ':': t = make(Tok::Colon, ":"); break;
      case '.': t = make(Tok::Dot, "."); break;
      case '+': t = make(Tok::Plus, "+"); break;
      case '-': t = make(Tok::Minus, "-"); break;
      case '*': t = make(Tok::Star, "*"); break;
      case '/': t = make(Tok::Slash, "/"); break;
      case '<':
        if (two('=')) {
          advance();
          t = make(Tok::Le, "<=");
        } else {
          t = make(Tok::Lt, "<");
        }
        break;
      case '>':
        if (two('=')) {
          advance();
          t = make(Tok::Ge, ">=");
        } else {
          t = make(Tok::Gt, ">");
        }
        break;
      case '=':
        if (two('=')) {
          advance();
          t = make(Tok::EqEq, "==");
        } else {
          t = make(Tok::Assign, "=");
        }
        break;
      case '!':
        if (two('=')) {
          advance();
          t = make(Tok::Ne, "!=");
          break;
        }
        throw SyntaxError("unexpected character '!'", line_, col_);
      default:
        throw SyntaxError(std::string("unexpected character '") + c + "'", line_, col_);
    }
    t.col = col;
    advance();
    return t;
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

enum class Ty { Num, Cat, Bool };

/// Declared-feature environment built up in source order.
struct Env {
  std::map<std::string, Ty> features;
  std::set<std::string> objects;
  std::set<std::string> names;  // params + objects, for uniqueness

  void declare_param(const std::string& name, Ty ty, int line) {
    if (!names.insert(name).second)
      throw ValidationError("duplicate declaration of \"" + name + "\" (line " +
                            std::to_string(line) + ")");
    features[name] = ty;
  }

  void declare_object(const std::string& name, int line) {
    if (!names.insert(name).second)
      throw ValidationError("duplicate declaration of \"" + name + "\" (line " +
                            std::to_string(line) + ")");
    objects.insert(name);
    for (const char* f : {"x", "y", "heading", "colorR", "colorG", "colorB"})
      features[name + "." + f] = Ty::Num;
    features[name + ".model"] = Ty::Cat;
  }
};

Ty distribution_ty(const Distribution& d) {
  switch (d.kind) {
    case DistKind::UniformReal:
    case DistKind::UniformInt: return Ty::Num;
    case DistKind::Categorical: return Ty::Cat;
    case DistKind::Constant: return is_number(d.constant) ? Ty::Num : Ty::Cat;
  }
  return Ty::Num;
}

/// Type-checks an expression against declared features; returns its type.
Ty check_expr(const Expr& e, const Env& env) {
  return std::visit(
      [&](const auto& node) -> Ty {
        using T = std::decay_t<decltype(node)>;
        if constexpr (std::is_same_v<T, NumberLit>) {
          return Ty::Num;
        } else if constexpr (std::is_same_v<T, StringLit>) {
          return Ty::Cat;
        } else if constexpr (std::is_same_v<T, FeatureRef>) {
          auto it = env.features.find(node.name);
          if (it == env.features.end())
            throw ValidationError("reference to undeclared feature \"" + node.name + "\"");
          return it->second;
        } else if constexpr (std::is_same_v<T, NegExpr>) {
          if (check_expr(*node.operand, env) != Ty::Num)
            throw ValidationError("negation requires a numeric operand");
          return Ty::Num;
        } else if constexpr (std::is_same_v<T, BuiltinCall>) {
          for (const std::string& obj : {node.a, node.b})
            if (!env.objects.count(obj))
              throw ValidationError("builtin references undeclared object \"" + obj + "\"");
          return node.fn == Builtin::VisibleFrom ? Ty::Bool : Ty::Num;
        } else if constexpr (std::is_same_v<T, MembershipExpr>) {
          if (check_expr(*node.operand, env) != Ty::Cat)
            throw ValidationError("`in` requires a categorical left-hand side");
          if (node.set.empty()) throw ValidationError("`in` requires a nonempty set");
          std::set<std::string> uniq(node.set.begin(), node.set.end());
          if (uniq.size() != node.set.size())
            throw ValidationError("`in` set values must be distinct");
          return Ty::Bool;
        } else {  // BinaryExpr
          Ty l = check_expr(*node.lhs, env);
          Ty r = check_expr(*node.rhs, env);
          switch (node.op) {
            case BinOp::Add:
            case BinOp::Sub:
            case BinOp::Mul:
            case BinOp::Div:
              if (l != Ty::Num || r != Ty::Num)
                throw ValidationError("arithmetic requires numeric operands");
              return Ty::Num;
            case BinOp::Lt:
            case BinOp::Le:
            case BinOp::Gt:
            case BinOp::Ge:
              if (l != Ty::Num || r != Ty::Num)
                throw ValidationError("ordering comparison requires numeric operands");
              return Ty::Bool;
            case BinOp::Eq:
            case BinOp::Ne:
              if (l != r || l == Ty::Bool)
                throw ValidationError("equality requires two numeric or two categorical operands");
              return Ty::Bool;
            case BinOp::And:
              if (l != Ty::Bool || r != Ty::Bool)
                throw ValidationError("`and` requires boolean operands");
              return Ty::Bool;
          }
          return Ty::Bool;
        }
      },
      e.node);
}

/// Folds a constant arithmetic expression; nullopt if it references anything.
std::optional<double> fold_constant(const Expr& e) {
  return std::visit(
      [&](const auto& node) -> std::optional<double> {
        using T = std::decay_t<decltype(node)>;
        if constexpr (std::is_same_v<T, NumberLit>) {
          return node.value;
        } else if constexpr (std::is_same_v<T, NegExpr>) {
          auto v = fold_constant(*node.operand);
          return v ? std::optional<double>(-*v) : std::nullopt;
        } else if constexpr (std::is_same_v<T, BinaryExpr>) {
          auto l = fold_constant(*node.lhs);
          auto r = fold_constant(*node.rhs);
          if (!l || !r) return std::nullopt;
          switch (node.op) {
            case BinOp::Add: return *l + *r;
            case BinOp::Sub: return *l - *r;
            case BinOp::Mul: return *l * *r;
            case BinOp::Div:
              if (*r == 0.0) throw ValidationError("division by zero in constant expression");
              return *l / *r;
            default: return std::nullopt;
          }
        } else {
          return std::nullopt;
        }
      },
      e.node);
}

class Parser {
 public:
  explicit Parser(std::string_view src) : toks_(Lexer(src).tokenize()) {
    program_.source_text = std::string(src);
  }

  ScenarioProgram run() {
    while (peek().kind != Tok::End) {
      if (peek().kind == Tok::Newline) {
        next();
        continue;
      }
      statement();
      expect_end_of_line();
    }
    finish();
    return std::move(program_);
  }

 private:
  const Token& peek(int ahead = 0) const {
    std::size_t i = std::min(pos_ + ahead, toks_.size() - 1);
    return toks_[i];
  }
  const Token& next() { return toks_[std::min(pos_++, toks_.size() - 1)]; }

  [[noreturn]] void fail(const std::string& msg) const {
    const Token& t = peek();
    throw SyntaxError(msg, t.line, t.col);
  }

  const Token& expect(Tok kind, const char* what) {
    if (peek().kind != kind) fail(std::string("expected ") + what);
    return next();
  }

  void expect_end_of_line() {
    if (peek().kind == Tok::End) return;
    if (peek().kind != Tok::Newline) fail("expected end of line");
    next();
  }

  bool at_ident(const char* word) const {
    return peek().kind == Tok::Ident && peek().text == word;
  }

  void statement() {
    if (at_ident("param")) {
      next();
      param_decl();
    } else if (at_ident("require")) {
      next();
      require_stmt();
    } else if (peek().kind == Tok::Ident) {
      object_decl();
    } else {
      fail("expected a statement (param, object declaration, or require)");
    }
  }

  std::string identifier() {
    const Token& t = expect(Tok::Ident, "an identifier");
    if (reserved_words().count(t.text))
      throw SyntaxError("\"" + t.text + "\" is a reserved word", t.line, t.col);
    return t.text;
  }

  void param_decl() {
    int line = peek().line;
    std::string name = identifier();
    expect(Tok::Assign, "'='");
    Distribution d = distribution_or_constant();
    env_.declare_param(name, distribution_ty(d), line);
    program_.params.push_back(ParamDecl{std::move(name), std::move(d)});
  }

  void require_stmt() {
    ExprPtr e = bool_expr();
    if (check_expr(*e, env_) != Ty::Bool)
      throw ValidationError("require expects a boolean expression");
    program_.requires_.push_back(std::move(e));
  }

  void object_decl() {
    int line = peek().line;
    std::string name = identifier();
    expect(Tok::Assign, "'='");
    if (!at_ident("car")) fail("expected 'car'");
    next();
    expect(Tok::LParen, "'('");

    ObjectDecl obj;
    obj.name = name;
    obj.model = Distribution::categorical(default_car_models());
    obj.color = {Distribution::uniform_int(0, 255), Distribution::uniform_int(0, 255),
                 Distribution::uniform_int(0, 255)};
    std::set<std::string> seen;
    bool have_x = false, have_y = false, have_heading = false;
    if (peek().kind != Tok::RParen) {
      while (true) {
        const Token& key = expect(Tok::Ident, "a field name");
        if (!seen.insert(key.text).second)
          throw SyntaxError("duplicate field \"" + key.text + "\"", key.line, key.col);
        expect(Tok::Colon, "':'");
        if (key.text == "x") {
          obj.x = field_value();
          have_x = true;
        } else if (key.text == "y") {
          obj.y = field_value();
          have_y = true;
        } else if (key.text == "heading") {
          obj.heading = field_value();
          have_heading = true;
        } else if (key.text == "model") {
          obj.model = distribution_or_constant();
          if (distribution_ty(obj.model) != Ty::Cat)
            throw ValidationError("model must be categorical");
        } else if (key.text == "color") {
          expect(Tok::LParen, "'('");
          for (int c = 0; c < 3; ++c) {
            obj.color[c] = distribution_or_constant();
            if (distribution_ty(obj.color[c]) != Ty::Num)
              throw ValidationError("color channels must be numeric");
            if (c < 2) expect(Tok::Comma, "','");
          }
          expect(Tok::RParen, "')'");
        } else {
          throw SyntaxError("unknown field \"" + key.text + "\"", key.line, key.col);
        }
        if (peek().kind == Tok::Comma) {
          next();
          continue;
        }
        break;
      }
    }
    expect(Tok::RParen, "')'");

    if (!have_x || !have_y)
      throw ValidationError("object \"" + obj.name + "\" must declare x and y");
    if (!have_heading) obj.heading = Distribution::uniform_real(0.0, 360.0);

    check_field(obj.x, obj.name + ".x");
    check_field(obj.y, obj.name + ".y");
    check_field(obj.heading, obj.name + ".heading");
    env_.declare_object(obj.name, line);
    program_.objects.push_back(std::move(obj));
  }

  void check_field(const FieldValue& fv, const std::string& what) {
    if (std::holds_alternative<Distribution>(fv)) {
      if (distribution_ty(std::get<Distribution>(fv)) != Ty::Num)
        throw ValidationError(what + " must be numeric");
      return;
    }
    if (check_expr(*std::get<ExprPtr>(fv), env_) != Ty::Num)
      throw ValidationError(what + " must be a numeric expression");
  }

  /// A field value: distribution keyword, or an expression. Constant
  /// expressions fold into Constant distributions, so `x: 2+3` and `x: 5`
  /// produce identical ASTs.
  FieldValue field_value() {
    if (at_ident("uniform") || at_ident("range") || at_ident("choice"))
      return distribution_keyword();
    ExprPtr e = sum_expr();
    if (auto c = fold_constant(*e)) return Distribution::fixed(*c);
    return e;
  }

  Distribution distribution_or_constant() {
    if (at_ident("uniform") || at_ident("range") || at_ident("choice"))
      return distribution_keyword();
    if (peek().kind == Tok::String) return Distribution::fixed(next().text);
    ExprPtr e = sum_expr();
    auto c = fold_constant(*e);
    if (!c) throw ValidationError("expected a distribution or a constant");
    return Distribution::fixed(*c);
  }

  Distribution distribution_keyword() {
    const Token& kw = next();
    expect(Tok::LParen, "'('");
    if (kw.text == "choice") {
      std::vector<std::string> values;
      while (true) {
        values.push_back(expect(Tok::String, "a string value").text);
        if (peek().kind == Tok::Comma) {
          next();
          continue;
        }
        break;
      }
      expect(Tok::RParen, "')'");
      std::set<std::string> uniq(values.begin(), values.end());
      if (uniq.size() != values.size())
        throw ValidationError("choice() values must be distinct");
      return Distribution::categorical(std::move(values));
    }
    double lo = constant_number();
    expect(Tok::Comma, "','");
    double hi = constant_number();
    expect(Tok::RParen, "')'");
    if (!std::isfinite(lo) || !std::isfinite(hi))
      throw ValidationError("distribution bounds must be finite");
    if (kw.text == "uniform") {
      if (!(lo < hi)) throw ValidationError("uniform(a, b) requires a < b");
      return Distribution::uniform_real(lo, hi);
    }
    if (lo != std::floor(lo) || hi != std::floor(hi))
      throw ValidationError("range(a, b) requires integer bounds");
    if (!(lo <= hi)) throw ValidationError("range(a, b) requires a <= b");
    return Distribution::uniform_int(lo, hi);
  }

  double constant_number() {
    ExprPtr e = sum_expr();
    auto c = fold_constant(*e);
    if (!c) throw ValidationError("distribution bounds must be constant expressions");
    return *c;
  }

  // expression grammar: and > comparison/in > additive > multiplicative > unary
  ExprPtr bool_expr() {
    ExprPtr lhs = comparison();
    while (at_ident("and")) {
      next();
      lhs = binary(BinOp::And, std::move(lhs), comparison());
    }
    return lhs;
  }

  ExprPtr comparison() {
    ExprPtr lhs = sum_expr();
    switch (peek().kind) {
      case Tok::Lt: next(); return binary(BinOp::Lt, std::move(lhs), sum_expr());
      case Tok::Le: next(); return binary(BinOp::Le, std::move(lhs), sum_expr());
      case Tok::Gt: next(); return binary(BinOp::Gt, std::move(lhs), sum_expr());
      case Tok::Ge: next(); return binary(BinOp::Ge, std::move(lhs), sum_expr());
      case Tok::EqEq:
      case Tok::Assign: next(); return binary(BinOp::Eq, std::move(lhs), sum_expr());
      case Tok::Ne: next(); return binary(BinOp::Ne, std::move(lhs), sum_expr());
      case Tok::Ident:
        if (peek().text == "in") {
          next();
          expect(Tok::LBrace, "'{'");
          std::vector<std::string> set;
          while (true) {
            set.push_back(expect(Tok::String, "a string value").text);
            if (peek().kind == Tok::Comma) {
              next();
              continue;
            }
            break;
          }
          expect(Tok::RBrace, "'}'");
          return membership(std::move(lhs), std::move(set));
        }
        return lhs;
      default: return lhs;
    }
  }

  ExprPtr sum_expr() {
    ExprPtr lhs = term();
    while (peek().kind == Tok::Plus || peek().kind == Tok::Minus) {
      BinOp op = next().kind == Tok::Plus ? BinOp::Add : BinOp::Sub;
      lhs = binary(op, std::move(lhs), term());
    }
    return lhs;
  }

  ExprPtr term() {
    ExprPtr lhs = unary();
    while (peek().kind == Tok::Star || peek().kind == Tok::Slash) {
      BinOp op = next().kind == Tok::Star ? BinOp::Mul : BinOp::Div;
      lhs = binary(op, std::move(lhs), unary());
    }
    return lhs;
  }

  ExprPtr unary() {
    if (peek().kind == Tok::Minus) {
      next();
      return make_expr(Expr{NegExpr{unary()}});
    }
    return primary();
  }

  ExprPtr primary() {
    const Token& t = peek();
    switch (t.kind) {
      case Tok::Number: return number(next().number);
      case Tok::String: return string_lit(next().text);
      case Tok::LParen: {
        next();
        ExprPtr e = bool_expr();
        expect(Tok::RParen, "')'");
        return e;
      }
      case Tok::Ident: {
        if (t.text == "dist" || t.text == "headingDiff" || t.text == "visibleFrom")
          return builtin();
        std::string name = next().text;
        if (peek().kind == Tok::Dot) {
          next();
          const Token& field = expect(Tok::Ident, "a field name");
          static const std::set<std::string> fields = {"x",      "y",      "heading", "model",
                                                       "colorR", "colorG", "colorB"};
          if (!fields.count(field.text))
            throw SyntaxError("unknown object field \"" + field.text + "\"", field.line,
                              field.col);
          return feature_ref(name + "." + field.text);
        }
        return feature_ref(name);
      }
      default: fail("expected an expression");
    }
  }

  ExprPtr builtin() {
    const Token& t = next();
    Builtin fn = t.text == "dist"          ? Builtin::Dist
                 : t.text == "headingDiff" ? Builtin::HeadingDiff
                                           : Builtin::VisibleFrom;
    expect(Tok::LParen, "'('");
    std::string a = identifier();
    expect(Tok::Comma, "','");
    std::string b = identifier();
    expect(Tok::RParen, "')'");
    return builtin_call(fn, std::move(a), std::move(b));
  }

  void finish() {
    if (program_.objects.empty() || program_.objects.front().name != "ego")
      throw ValidationError("program must declare `ego` as its first object");
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  ScenarioProgram program_;
  Env env_;
};

int binop_precedence(BinOp op) {
  switch (op) {
    case BinOp::And: return 1;
    case BinOp::Lt:
    case BinOp::Le:
    case BinOp::Gt:
    case BinOp::Ge:
    case BinOp::Eq:
    case BinOp::Ne: return 2;
    case BinOp::Add:
    case BinOp::Sub: return 3;
    case BinOp::Mul:
    case BinOp::Div: return 4;
  }
  return 5;
}

const char* binop_text(BinOp op) {
  switch (op) {
    case BinOp::And: return "and";
    case BinOp::Lt: return "<";
    case BinOp::Le: return "<=";
    case BinOp::Gt: return ">";
    case BinOp::Ge: return ">=";
    case BinOp::Eq: return "==";
    case BinOp::Ne: return "!=";
    case BinOp::Add: return "+";
    case BinOp::Sub: return "-";
    case BinOp::Mul: return "*";
    case BinOp::Div: return "/";
  }
  return "?";
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  out += '"';
  return out;
}

void emit_expr(std::string& out, const Expr& e, int parent_prec);

void emit_child(std::string& out, const ExprPtr& e, int prec, bool needs_parens_on_equal) {
  int child_prec = 5;
  if (const auto* bin = std::get_if<BinaryExpr>(&e->node)) child_prec = binop_precedence(bin->op);
  if (std::holds_alternative<MembershipExpr>(e->node)) child_prec = 2;
  bool parens = child_prec < prec || (needs_parens_on_equal && child_prec == prec);
  if (parens) out += '(';
  emit_expr(out, *e, 0);
  if (parens) out += ')';
}

void emit_expr(std::string& out, const Expr& e, int) {
  std::visit(
      [&](const auto& node) {
        using T = std::decay_t<decltype(node)>;
        if constexpr (std::is_same_v<T, NumberLit>) {
          out += format_number(node.value);
        } else if constexpr (std::is_same_v<T, StringLit>) {
          out += quote(node.value);
        } else if constexpr (std::is_same_v<T, FeatureRef>) {
          out += node.name;
        } else if constexpr (std::is_same_v<T, NegExpr>) {
          out += '-';
          emit_child(out, node.operand, 5, false);
        } else if constexpr (std::is_same_v<T, BinaryExpr>) {
          int prec = binop_precedence(node.op);
          emit_child(out, node.lhs, prec, false);
          out += ' ';
          out += binop_text(node.op);
          out += ' ';
          emit_child(out, node.rhs, prec, node.op == BinOp::Sub || node.op == BinOp::Div);
        } else if constexpr (std::is_same_v<T, BuiltinCall>) {
          out += node.fn == Builtin::Dist          ? "dist"
                 : node.fn == Builtin::HeadingDiff ? "headingDiff"
                                                   : "visibleFrom";
          out += '(';
          out += node.a;
          out += ", ";
          out += node.b;
          out += ')';
        } else {  // MembershipExpr
          emit_child(out, node.operand, 2, false);
          out += " in {";
          for (std::size_t i = 0; i < node.set.size(); ++i) {
            if (i) out += ", ";
            out += quote(node.set[i]);
          }
          out += '}';
        }
      },
      e.node);
}

void emit_distribution(std::string& out, const Distribution& d) {
  switch (d.kind) {
    case DistKind::UniformReal:
      out += "uniform(" + format_number(d.lo) + ", " + format_number(d.hi) + ")";
      break;
    case DistKind::UniformInt:
      out += "range(" + format_number(d.lo) + ", " + format_number(d.hi) + ")";
      break;
    case DistKind::Categorical:
      out += "choice(";
      for (std::size_t i = 0; i < d.values.size(); ++i) {
        if (i) out += ", ";
        out += quote(d.values[i]);
      }
      out += ")";
      break;
    case DistKind::Constant:
      out += is_number(d.constant) ? format_number(as_number(d.constant))
                                   : quote(as_string(d.constant));
      break;
  }
}

void emit_field(std::string& out, const FieldValue& fv) {
  if (std::holds_alternative<Distribution>(fv))
    emit_distribution(out, std::get<Distribution>(fv));
  else
    emit_expr(out, *std::get<ExprPtr>(fv), 0);
}

}  // namespace

std::string format_number(double v) {
  if (v == 0.0) return "0";  // normalizes -0
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

ScenarioProgram parse(std::string_view source) { return Parser(source).run(); }

std::string emit(const ScenarioProgram& program) {
  std::string out;
  for (const auto& p : program.params) {
    out += "param " + p.name + " = ";
    emit_distribution(out, p.dist);
    out += '\n';
  }
  for (const auto& obj : program.objects) {
    out += obj.name + " = car(x: ";
    emit_field(out, obj.x);
    out += ", y: ";
    emit_field(out, obj.y);
    out += ", heading: ";
    emit_field(out, obj.heading);
    out += ", model: ";
    emit_distribution(out, obj.model);
    out += ", color: (";
    for (int c = 0; c < 3; ++c) {
      if (c) out += ", ";
      emit_distribution(out, obj.color[c]);
    }
    out += "))\n";
  }
  for (const auto& r : program.requires_) {
    out += "require ";
    emit_expr(out, *r, 0);
    out += '\n';
  }
  return out;
}

void validate(const ScenarioProgram& program) {
  // Canonical-order validation for programmatically built ASTs (splicing);
  // parse() additionally enforces source-order declaration.
  Env env;
  for (const auto& p : program.params) env.declare_param(p.name, distribution_ty(p.dist), 0);
  for (const auto& obj : program.objects) {
    auto check_num = [&](const FieldValue& fv, const char* what) {
      if (std::holds_alternative<Distribution>(fv)) {
        if (distribution_ty(std::get<Distribution>(fv)) != Ty::Num)
          throw ValidationError(obj.name + "." + what + " must be numeric");
      } else if (check_expr(*std::get<ExprPtr>(fv), env) != Ty::Num) {
        throw ValidationError(obj.name + "." + what + " must be a numeric expression");
      }
    };
    check_num(obj.x, "x");
    check_num(obj.y, "y");
    check_num(obj.heading, "heading");
    if (distribution_ty(obj.model) != Ty::Cat)
      throw ValidationError(obj.name + ".model must be categorical");
    for (const auto& ch : obj.color)
      if (distribution_ty(ch) != Ty::Num)
        throw ValidationError(obj.name + " color channels must be numeric");
    env.declare_object(obj.name, 0);
  }
  for (const auto& r : program.requires_)
    if (check_expr(*r, env) != Ty::Bool)
      throw ValidationError("require expects a boolean expression");
  if (program.objects.empty() || program.objects.front().name != "ego")
    throw ValidationError("program must declare `ego` as its first object");
}

}  // namespace scendbg::dsl
