#pragma once

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "loja/poly.hpp"

namespace loja {

/// Parser for the polynomial text grammar: terms joined by `+`/`-`, each term
/// an optional coefficient and `*`-separated `x<k>^<e>` factors, e.g.
/// `x1^2*x2 + 3*x2^4 - 0.5*x1`. Whitespace-insensitive; the number of
/// variables is the largest index mentioned.
class PolyParser {
public:
    explicit PolyParser(std::string text) : text_(std::move(text)) {}

    Poly parse() {
        std::vector<RawTerm> raw;
        int max_index = 0;

        skip_ws();
        if (eof()) throw parse_error("empty polynomial", pos_);
        bool first = true;
        while (!eof()) {
            double sign = 1.0;
            skip_ws();
            if (peek() == '+' || peek() == '-') {
                sign = peek() == '-' ? -1.0 : 1.0;
                ++pos_;
            } else if (!first) {
                throw parse_error("expected '+' or '-' between terms", pos_);
            }
            first = false;
            RawTerm t = parse_term();
            t.coeff *= sign;
            for (const auto& [idx, e] : t.exps) max_index = std::max(max_index, idx);
            raw.push_back(std::move(t));
            skip_ws();
        }

        Poly p(max_index);
        for (const auto& t : raw) {
            MultiIndex a(max_index, 0);
            for (const auto& [idx, e] : t.exps) a[idx - 1] += e;
            p += Poly::monomial(max_index, a, t.coeff);
        }
        return p;
    }

private:
    struct RawTerm {
        double coeff = 1.0;
        std::map<int, int> exps; // variable index (1-based) -> exponent
    };

    bool eof() const { return pos_ >= text_.size(); }
    char peek() const { return eof() ? '\0' : text_[pos_]; }
    void skip_ws() {
        while (!eof() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    RawTerm parse_term() {
        RawTerm t;
        skip_ws();
        bool need_factor = true;
        if (std::isdigit(static_cast<unsigned char>(peek())) || peek() == '.') {
            t.coeff = parse_number();
            need_factor = false;
            skip_ws();
            if (peek() == '*') {
                ++pos_;
                need_factor = true;
            }
        }
        while (true) {
            skip_ws();
            if (peek() == 'x') {
                auto [idx, e] = parse_factor();
                t.exps[idx] += e;
                need_factor = false;
                skip_ws();
                if (peek() == '*') {
                    ++pos_;
                    need_factor = true;
                    continue;
                }
                break;
            }
            if (need_factor)
                throw parse_error("expected a factor 'x<k>' or a number", pos_);
            break;
        }
        return t;
    }

    std::pair<int, int> parse_factor() {
        ++pos_; // consume 'x'
        const int idx = parse_uint("variable index");
        if (idx == 0) throw parse_error("variable index must be >= 1", pos_ - 1);
        int e = 1;
        skip_ws();
        if (peek() == '^') {
            ++pos_;
            skip_ws();
            if (peek() == '-') throw parse_error("negative exponent rejected", pos_);
            e = parse_uint("exponent");
        }
        return {idx, e};
    }

    int parse_uint(const char* what) {
        if (!std::isdigit(static_cast<unsigned char>(peek())))
            throw parse_error(std::string("expected ") + what, pos_);
        long v = 0;
        while (std::isdigit(static_cast<unsigned char>(peek()))) {
            v = v * 10 + (text_[pos_] - '0');
            if (v > 1'000'000) throw parse_error(std::string(what) + " too large", pos_);
            ++pos_;
        }
        return static_cast<int>(v);
    }

    double parse_number() {
        const char* begin = text_.c_str() + pos_;
        char* end = nullptr;
        const double v = std::strtod(begin, &end);
        if (end == begin) throw parse_error("expected a number", pos_);
        pos_ += static_cast<std::size_t>(end - begin);
        return v;
    }

    std::string text_;
    std::size_t pos_ = 0;
};

inline Poly parse_poly(const std::string& text) { return PolyParser(text).parse(); }

/// Canonical text form: terms in descending graded-lex order, coefficients at
/// full double precision. parse_poly(to_text(p)) == p.
inline std::string to_text(const Poly& p) {
    if (p.is_zero()) return "0";
    std::string out;
    for (auto it = p.terms().rbegin(); it != p.terms().rend(); ++it) {
        const auto& [a, c] = *it;
        const bool neg = c < 0;
        if (out.empty())
            out += neg ? "-" : "";
        else
            out += neg ? " - " : " + ";

        const double mag = std::abs(c);
        std::string factors;
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (a[i] == 0) continue;
            if (!factors.empty()) factors += "*";
            factors += "x" + std::to_string(i + 1);
            if (a[i] > 1) factors += "^" + std::to_string(a[i]);
        }
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.17g", mag);
        if (factors.empty())
            out += buf;
        else if (mag == 1.0)
            out += factors;
        else
            out += std::string(buf) + "*" + factors;
    }
    return out;
}

} // namespace loja
