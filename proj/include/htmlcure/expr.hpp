#pragma once
// Restricted expression language evaluated in the synthetic page context.
// Covers the assertion surface the deterministic backend supports:
//
//   literals        42, 1.5, "text", 'text', true, false
//   page state      state.score, state.running
//   document        document.title
//   helpers         text(sel), value(sel), visible(sel), exists(sel),
//                   count(sel), body_text_contains(s)
//   operators       ! - + &&  ||  == != < <= > >=  ( )
//
// Comparison of mixed types is an evaluation error, not false; a broken
// assertion should fail loudly, not vacuously.

#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "htmlcure/errors.hpp"

namespace htmlcure::expr {

struct EvalError : Error {
    using Error::Error;
};

using Value = std::variant<bool, double, std::string>;

bool truthy(const Value& v);
std::string value_str(const Value& v);

// Host environment an expression reads from.
class Context {
public:
    virtual ~Context() = default;
    virtual std::optional<Value> state_var(const std::string& name) const = 0;
    virtual std::string document_title() const = 0;
    virtual std::string element_text(const std::string& selector) const = 0;
    virtual std::string element_value(const std::string& selector) const = 0;
    virtual bool element_visible(const std::string& selector) const = 0;
    virtual bool element_exists(const std::string& selector) const = 0;
    virtual int element_count(const std::string& selector) const = 0;
    virtual bool body_text_contains(const std::string& needle) const = 0;
};

class Expr {
public:
    virtual ~Expr() = default;
    virtual Value eval(const Context& ctx) const = 0;
};

using ExprPtr = std::unique_ptr<Expr>;

// Throws EvalError on syntax errors.
ExprPtr parse(const std::string& source);

// Parse + evaluate in one shot.
Value evaluate(const std::string& source, const Context& ctx);
bool evaluate_predicate(const std::string& source, const Context& ctx);

} // namespace htmlcure::expr
