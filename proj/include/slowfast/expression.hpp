#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "slowfast/error.hpp"
#include "slowfast/model.hpp"

namespace slowfast {

/// Scalar arithmetic expression compiled once into a closure tree.
///
///   expr    := term (('+' | '-') term)*
///   term    := unary (('*' | '/') unary)*
///   unary   := ('+' | '-') unary | power
///   power   := primary ('^' unary)?          right associative
///   primary := number | name | func '(' expr ')' | '(' expr ')'
///   func    := sin | cos | exp | sqrt | log | abs
///
/// Names resolve to slots of one flat argument vector; `pi` is a constant.
class Expression {
public:
    using Eval = std::function<double(std::span<const double>)>;
    using SlotMap = std::map<std::string, std::size_t>;

    static Expression parse(const std::string& text, const SlotMap& slots) {
        Parser p{text, slots, 0, {}};
        auto e = p.expr();
        p.skip_space();
        if (p.pos != text.size()) p.error("unexpected '" + std::string(1, text[p.pos]) + "'");
        return Expression(text, std::move(e), std::move(p.used));
    }

    [[nodiscard]] double operator()(std::span<const double> args) const { return eval_(args); }
    [[nodiscard]] const std::string& text() const noexcept { return text_; }
    [[nodiscard]] bool uses(std::size_t slot) const { return used_.count(slot) > 0; }

private:
    Expression(std::string text, Eval e, std::set<std::size_t> used)
        : text_(std::move(text)), eval_(std::move(e)), used_(std::move(used)) {}

    struct Parser {
        const std::string& s;
        const SlotMap& slots;
        std::size_t pos;
        std::set<std::size_t> used;

        [[noreturn]] void error(const std::string& what) const {
            fail(ErrorCode::ConfigError, "expression '" + s + "' at column " + std::to_string(pos + 1) + ": " + what);
        }
        void skip_space() {
            while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
        }
        bool accept(char c) {
            skip_space();
            if (pos < s.size() && s[pos] == c) {
                ++pos;
                return true;
            }
            return false;
        }

        Eval expr() {
            auto lhs = term();
            for (;;) {
                if (accept('+')) {
                    lhs = [a = std::move(lhs), b = term()](std::span<const double> v) { return a(v) + b(v); };
                } else if (accept('-')) {
                    lhs = [a = std::move(lhs), b = term()](std::span<const double> v) { return a(v) - b(v); };
                } else {
                    return lhs;
                }
            }
        }
        Eval term() {
            auto lhs = unary();
            for (;;) {
                if (accept('*')) {
                    lhs = [a = std::move(lhs), b = unary()](std::span<const double> v) { return a(v) * b(v); };
                } else if (accept('/')) {
                    lhs = [a = std::move(lhs), b = unary()](std::span<const double> v) { return a(v) / b(v); };
                } else {
                    return lhs;
                }
            }
        }
        Eval unary() {
            if (accept('-')) return [a = unary()](std::span<const double> v) { return -a(v); };
            if (accept('+')) return unary();
            return power();
        }
        Eval power() {
            auto base = primary();
            if (!accept('^')) return base;
            auto ex = unary();
            return [a = std::move(base), b = std::move(ex)](std::span<const double> v) { return std::pow(a(v), b(v)); };
        }
        Eval primary() {
            skip_space();
            if (pos >= s.size()) error("unexpected end of input");
            const char c = s[pos];
            if (accept('(')) {
                auto e = expr();
                if (!accept(')')) error("expected ')'");
                return e;
            }
            if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
            if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return named();
            error("unexpected '" + std::string(1, c) + "'");
        }
        Eval number() {
            double v = 0.0;
            const auto res = std::from_chars(s.data() + pos, s.data() + s.size(), v);
            if (res.ec != std::errc{}) error("malformed number");
            pos = static_cast<std::size_t>(res.ptr - s.data());
            return [v](std::span<const double>) { return v; };
        }
        Eval named() {
            const std::size_t start = pos;
            while (pos < s.size() && (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_')) ++pos;
            const std::string name = s.substr(start, pos - start);
            if (accept('(')) {
                auto arg = expr();
                if (!accept(')')) error("expected ')' after argument of " + name);
                return apply(name, std::move(arg));
            }
            if (name == "pi") return [](std::span<const double>) { return 3.141592653589793238463; };
            const auto it = slots.find(name);
            if (it == slots.end()) error("unknown variable '" + name + "'");
            used.insert(it->second);
            return [k = it->second](std::span<const double> v) { return v[k]; };
        }
        Eval apply(const std::string& name, Eval a) {
            using F = double (*)(double);
            static const std::map<std::string, F> table = {
                {"sin", [](double t) { return std::sin(t); }},   {"cos", [](double t) { return std::cos(t); }},
                {"exp", [](double t) { return std::exp(t); }},   {"sqrt", [](double t) { return std::sqrt(t); }},
                {"log", [](double t) { return std::log(t); }},   {"abs", [](double t) { return std::abs(t); }},
            };
            const auto it = table.find(name);
            if (it == table.end()) error("unknown function '" + name + "'");
            return [f = it->second, a = std::move(a)](std::span<const double> v) { return f(a(v)); };
        }
    };

    std::string text_;
    Eval eval_;
    std::set<std::size_t> used_;
};

/// Slots x1..xn followed by y1..yd.
inline Expression::SlotMap state_slots(std::size_t n, std::size_t d) {
    Expression::SlotMap m;
    for (std::size_t i = 0; i < n; ++i) m["x" + std::to_string(i + 1)] = i;
    for (std::size_t i = 0; i < d; ++i) m["y" + std::to_string(i + 1)] = n + i;
    return m;
}

/// Splits on ';' and trims; empty components are rejected.
inline std::vector<std::string> split_components(const std::string& text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const auto end = text.find(';', start);
        std::string part = text.substr(start, end == std::string::npos ? std::string::npos : end - start);
        const auto a = part.find_first_not_of(" \t");
        const auto b = part.find_last_not_of(" \t");
        require(a != std::string::npos, ErrorCode::ConfigError, "empty component in '" + text + "'");
        out.push_back(part.substr(a, b - a + 1));
        if (end == std::string::npos) return out;
        start = end + 1;
    }
}

struct CompiledCoefficient {
    CoefficientFn fn;
    bool uses_x = false;
};

/// Coefficient function from `count` ';'-separated component expressions in
/// x1..xn, y1..yd; matrices are row-major.
inline CompiledCoefficient compile_coefficient(const std::string& text, std::size_t n, std::size_t d,
                                               std::size_t count) {
    const auto parts = split_components(text);
    require(parts.size() == count, ErrorCode::ConfigError,
            "coefficient '" + text + "' has " + std::to_string(parts.size()) + " components, expected " +
                std::to_string(count));
    const auto slots = state_slots(n, d);
    auto exprs = std::make_shared<std::vector<Expression>>();
    bool uses_x = false;
    for (const auto& p : parts) {
        exprs->push_back(Expression::parse(p, slots));
        for (std::size_t i = 0; i < n; ++i) uses_x = uses_x || exprs->back().uses(i);
    }
    CompiledCoefficient out;
    out.uses_x = uses_x;
    out.fn = [exprs, n, d](std::span<const double> x, std::span<const double> y, std::span<double> out) {
        // small fixed buffer avoids an allocation per call for typical dimensions
        double buf[16];
        std::vector<double> big;
        std::span<double> args;
        if (n + d <= 16) {
            args = std::span<double>(buf, n + d);
        } else {
            big.resize(n + d);
            args = big;
        }
        for (std::size_t i = 0; i < n; ++i) args[i] = x[i];
        for (std::size_t i = 0; i < d; ++i) args[n + i] = y[i];
        for (std::size_t k = 0; k < exprs->size(); ++k) out[k] = (*exprs)[k](args);
    };
    return out;
}

}  // namespace slowfast
