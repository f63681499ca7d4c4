#include "htmlcure/expr.hpp"

#include <cctype>
#include <cmath>
#include <functional>

namespace htmlcure::expr {

bool truthy(const Value& v) {
    if (std::holds_alternative<bool>(v)) return std::get<bool>(v);
    if (std::holds_alternative<double>(v)) return std::get<double>(v) != 0.0;
    return !std::get<std::string>(v).empty();
}

std::string value_str(const Value& v) {
    if (std::holds_alternative<bool>(v)) return std::get<bool>(v) ? "true" : "false";
    if (std::holds_alternative<double>(v)) {
        double d = std::get<double>(v);
        if (d == static_cast<double>(static_cast<long long>(d)))
            return std::to_string(static_cast<long long>(d));
        return std::to_string(d);
    }
    return std::get<std::string>(v);
}

namespace {

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

enum class Tok {
    number, string, ident, lparen, rparen, comma,
    bang, minus, plus,
    and_and, or_or,
    eq, ne, lt, le, gt, ge,
    end,
};

struct Token {
    Tok kind;
    std::string text;
    double number = 0;
};

class Lexer {
public:
    explicit Lexer(const std::string& src) : src_(src) {}

    Token next() {
        skip_ws();
        if (pos_ >= src_.size()) return {Tok::end, ""};
        char c = src_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '.' && pos_ + 1 < src_.size() &&
             std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
            std::size_t start = pos_;
            while (pos_ < src_.size() &&
                   (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.'))
                ++pos_;
            std::string text = src_.substr(start, pos_ - start);
            return {Tok::number, text, std::stod(text)};
        }
        if (c == '\'' || c == '"') {
            char quote = c;
            ++pos_;
            std::string out;
            while (pos_ < src_.size() && src_[pos_] != quote) {
                if (src_[pos_] == '\\' && pos_ + 1 < src_.size()) ++pos_;
                out += src_[pos_++];
            }
            if (pos_ >= src_.size()) throw EvalError("unterminated string literal");
            ++pos_;
            return {Tok::string, out};
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t start = pos_;
            while (pos_ < src_.size() &&
                   (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_' ||
                    src_[pos_] == '.'))
                ++pos_;
            return {Tok::ident, src_.substr(start, pos_ - start)};
        }
        ++pos_;
        switch (c) {
            case '(': return {Tok::lparen, "("};
            case ')': return {Tok::rparen, ")"};
            case ',': return {Tok::comma, ","};
            case '+': return {Tok::plus, "+"};
            case '-': return {Tok::minus, "-"};
            case '!':
                if (peek('=')) { ++pos_; return {Tok::ne, "!="}; }
                return {Tok::bang, "!"};
            case '&':
                if (peek('&')) { ++pos_; return {Tok::and_and, "&&"}; }
                throw EvalError("single '&' is not an operator");
            case '|':
                if (peek('|')) { ++pos_; return {Tok::or_or, "||"}; }
                throw EvalError("single '|' is not an operator");
            case '=':
                if (peek('=')) { ++pos_; return {Tok::eq, "=="}; }
                throw EvalError("assignment is not allowed in assertions");
            case '<':
                if (peek('=')) { ++pos_; return {Tok::le, "<="}; }
                return {Tok::lt, "<"};
            case '>':
                if (peek('=')) { ++pos_; return {Tok::ge, ">="}; }
                return {Tok::gt, ">"};
        }
        throw EvalError(std::string("unexpected character '") + c + "' in expression");
    }

private:
    void skip_ws() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }
    bool peek(char c) const { return pos_ < src_.size() && src_[pos_] == c; }

    const std::string& src_;
    std::size_t pos_ = 0;
};

// ---------------------------------------------------------------------------
// AST
// ---------------------------------------------------------------------------

struct Literal final : Expr {
    explicit Literal(Value v) : value(std::move(v)) {}
    Value eval(const Context&) const override { return value; }
    Value value;
};

struct StateRef final : Expr {
    explicit StateRef(std::string n) : name(std::move(n)) {}
    Value eval(const Context& ctx) const override {
        auto v = ctx.state_var(name);
        if (!v) throw EvalError("undefined state variable: " + name);
        return *v;
    }
    std::string name;
};

struct TitleRef final : Expr {
    Value eval(const Context& ctx) const override { return ctx.document_title(); }
};

struct Call final : Expr {
    std::string fn;
    std::vector<ExprPtr> args;
    Value eval(const Context& ctx) const override {
        auto arg_str = [&](std::size_t i) {
            if (i >= args.size()) throw EvalError(fn + ": missing argument");
            return value_str(args[i]->eval(ctx));
        };
        if (fn == "text") return ctx.element_text(arg_str(0));
        if (fn == "value") return ctx.element_value(arg_str(0));
        if (fn == "visible") return ctx.element_visible(arg_str(0));
        if (fn == "exists") return ctx.element_exists(arg_str(0));
        if (fn == "count") return static_cast<double>(ctx.element_count(arg_str(0)));
        if (fn == "body_text_contains") return ctx.body_text_contains(arg_str(0));
        throw EvalError("unknown function: " + fn);
    }
};

struct Unary final : Expr {
    char op;
    ExprPtr operand;
    Value eval(const Context& ctx) const override {
        Value v = operand->eval(ctx);
        if (op == '!') return !truthy(v);
        if (!std::holds_alternative<double>(v)) throw EvalError("unary '-' needs a number");
        return -std::get<double>(v);
    }
};

struct Binary final : Expr {
    Tok op;
    ExprPtr lhs, rhs;

    Value eval(const Context& ctx) const override {
        if (op == Tok::and_and) {
            if (!truthy(lhs->eval(ctx))) return false;
            return truthy(rhs->eval(ctx));
        }
        if (op == Tok::or_or) {
            if (truthy(lhs->eval(ctx))) return true;
            return truthy(rhs->eval(ctx));
        }
        Value a = lhs->eval(ctx);
        Value b = rhs->eval(ctx);
        if (op == Tok::plus) {
            if (std::holds_alternative<std::string>(a) || std::holds_alternative<std::string>(b))
                return value_str(a) + value_str(b);
            return num(a) + num(b);
        }
        if (op == Tok::minus) return num(a) - num(b);
        if (op == Tok::eq || op == Tok::ne) {
            bool equal;
            if (a.index() == b.index()) equal = a == b;
            else if (std::holds_alternative<bool>(a) || std::holds_alternative<bool>(b))
                equal = truthy(a) == truthy(b);
            else throw EvalError("comparing incompatible types");
            return op == Tok::eq ? equal : !equal;
        }
        double x = num(a), y = num(b);
        switch (op) {
            case Tok::lt: return x < y;
            case Tok::le: return x <= y;
            case Tok::gt: return x > y;
            case Tok::ge: return x >= y;
            default: throw EvalError("bad binary operator");
        }
    }

    static double num(const Value& v) {
        if (std::holds_alternative<double>(v)) return std::get<double>(v);
        if (std::holds_alternative<bool>(v)) return std::get<bool>(v) ? 1.0 : 0.0;
        throw EvalError("expected a number, got string '" + std::get<std::string>(v) + "'");
    }
};

// ---------------------------------------------------------------------------
// Parser (recursive descent)
// ---------------------------------------------------------------------------

class Parser {
public:
    explicit Parser(const std::string& src) : lexer_(src) { advance(); }

    ExprPtr parse_expression() {
        ExprPtr e = parse_or();
        if (cur_.kind != Tok::end) throw EvalError("trailing input after expression");
        return e;
    }

private:
    void advance() { cur_ = lexer_.next(); }
    bool accept(Tok k) {
        if (cur_.kind != k) return false;
        advance();
        return true;
    }
    void expect(Tok k, const char* what) {
        if (!accept(k)) throw EvalError(std::string("expected ") + what);
    }

    ExprPtr parse_or() {
        ExprPtr e = parse_and();
        while (cur_.kind == Tok::or_or) {
            advance();
            auto b = std::make_unique<Binary>();
            b->op = Tok::or_or;
            b->lhs = std::move(e);
            b->rhs = parse_and();
            e = std::move(b);
        }
        return e;
    }

    ExprPtr parse_and() {
        ExprPtr e = parse_cmp();
        while (cur_.kind == Tok::and_and) {
            advance();
            auto b = std::make_unique<Binary>();
            b->op = Tok::and_and;
            b->lhs = std::move(e);
            b->rhs = parse_cmp();
            e = std::move(b);
        }
        return e;
    }

    ExprPtr parse_cmp() {
        ExprPtr e = parse_add();
        if (cur_.kind == Tok::eq || cur_.kind == Tok::ne || cur_.kind == Tok::lt ||
            cur_.kind == Tok::le || cur_.kind == Tok::gt || cur_.kind == Tok::ge) {
            Tok op = cur_.kind;
            advance();
            auto b = std::make_unique<Binary>();
            b->op = op;
            b->lhs = std::move(e);
            b->rhs = parse_add();
            return b;
        }
        return e;
    }

    ExprPtr parse_add() {
        ExprPtr e = parse_unary();
        while (cur_.kind == Tok::plus || cur_.kind == Tok::minus) {
            Tok op = cur_.kind;
            advance();
            auto b = std::make_unique<Binary>();
            b->op = op;
            b->lhs = std::move(e);
            b->rhs = parse_unary();
            e = std::move(b);
        }
        return e;
    }

    ExprPtr parse_unary() {
        if (cur_.kind == Tok::bang || cur_.kind == Tok::minus) {
            char op = cur_.kind == Tok::bang ? '!' : '-';
            advance();
            auto u = std::make_unique<Unary>();
            u->op = op;
            u->operand = parse_unary();
            return u;
        }
        return parse_primary();
    }

    ExprPtr parse_primary() {
        if (cur_.kind == Tok::number) {
            auto e = std::make_unique<Literal>(Value(cur_.number));
            advance();
            return e;
        }
        if (cur_.kind == Tok::string) {
            auto e = std::make_unique<Literal>(Value(cur_.text));
            advance();
            return e;
        }
        if (cur_.kind == Tok::lparen) {
            advance();
            ExprPtr e = parse_or();
            expect(Tok::rparen, "')'");
            return e;
        }
        if (cur_.kind == Tok::ident) {
            std::string name = cur_.text;
            advance();
            if (name == "true") return std::make_unique<Literal>(Value(true));
            if (name == "false") return std::make_unique<Literal>(Value(false));
            if (cur_.kind == Tok::lparen) {
                advance();
                auto call = std::make_unique<Call>();
                call->fn = name;
                if (cur_.kind != Tok::rparen) {
                    call->args.push_back(parse_or());
                    while (accept(Tok::comma)) call->args.push_back(parse_or());
                }
                expect(Tok::rparen, "')'");
                return call;
            }
            if (name.rfind("state.", 0) == 0)
                return std::make_unique<StateRef>(name.substr(6));
            if (name == "document.title") return std::make_unique<TitleRef>();
            throw EvalError("unknown identifier: " + name);
        }
        throw EvalError("unexpected token in expression");
    }

    Lexer lexer_;
    Token cur_;
};

} // namespace

ExprPtr parse(const std::string& source) {
    Parser p(source);
    return p.parse_expression();
}

Value evaluate(const std::string& source, const Context& ctx) {
    return parse(source)->eval(ctx);
}

bool evaluate_predicate(const std::string& source, const Context& ctx) {
    return truthy(evaluate(source, ctx));
}

} // namespace htmlcure::expr
