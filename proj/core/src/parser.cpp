#include <cctype>
#include <cstdlib>

#include "encaudit/policy.hpp"

// Concrete grammar:
//   formula  := orchain
//   orchain  := andchain ('or' andchain)*
//   andchain := unit ('and' unit)*
//   unit     := 'true' | 'false' | '(' formula ')' | quantifier | atom
//   quant    := 'forall' vars '.' '(' formula '->' formula ')'
//             | 'exists' vars '.' '(' formula ')'
//   atom     := IDENT '(' term (',' term)* ')' | term '=' term
//             | 'notin' '(' '(' vars ')' ',' '{' tuples '}' ')'
//   term     := IDENT | literal ['@' IDENT '.' INT]
//   literal  := INT | STRING | 0xHEX | 0xHEX ':' 0xHEX
//
// In a forall body the guard is everything left of '->'. In an exists body
// the last top-level conjunct is the nested formula and the rest form the
// guard; a single conjunct is all guard. '#' starts a line comment.

namespace encaudit {

namespace {

enum class Tok {
    Ident, Int, Str, Hex, LParen, RParen, LBrace, RBrace,
    Comma, Dot, Eq, Arrow, At, Colon, End
};

struct Token {
    Tok kind;
    std::string text;
    int64_t ival = 0;
    int line = 1, col = 1;
};

class Lexer {
public:
    explicit Lexer(const std::string& src) : src_(src) { advance(); }
    const Token& peek() const { return cur_; }
    Token take() {
        Token t = cur_;
        advance();
        return t;
    }

private:
    void advance() {
        skip_ws();
        cur_.line = line_;
        cur_.col = col_;
        if (pos_ >= src_.size()) {
            cur_.kind = Tok::End;
            return;
        }
        char c = src_[pos_];
        if (c == '(') { bump(); cur_ = mk(Tok::LParen, "("); return; }
        if (c == ')') { bump(); cur_ = mk(Tok::RParen, ")"); return; }
        if (c == '{') { bump(); cur_ = mk(Tok::LBrace, "{"); return; }
        if (c == '}') { bump(); cur_ = mk(Tok::RBrace, "}"); return; }
        if (c == ',') { bump(); cur_ = mk(Tok::Comma, ","); return; }
        if (c == '.') { bump(); cur_ = mk(Tok::Dot, "."); return; }
        if (c == '=') { bump(); cur_ = mk(Tok::Eq, "="); return; }
        if (c == '@') { bump(); cur_ = mk(Tok::At, "@"); return; }
        if (c == ':') { bump(); cur_ = mk(Tok::Colon, ":"); return; }
        if (c == '-') {
            if (pos_ + 1 < src_.size() && src_[pos_ + 1] == '>') {
                bump(); bump();
                cur_ = mk(Tok::Arrow, "->");
                return;
            }
            if (pos_ + 1 < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_ + 1]))) {
                lex_int();
                return;
            }
            throw ParseError("stray '-'", line_, col_);
        }
        if (c == '"') { lex_string(); return; }
        if (std::isdigit(static_cast<unsigned char>(c))) {
            if (c == '0' && pos_ + 1 < src_.size() && src_[pos_ + 1] == 'x') {
                lex_hex();
                return;
            }
            lex_int();
            return;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            size_t start = pos_;
            while (pos_ < src_.size() &&
                   (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
                bump();
            cur_ = mk(Tok::Ident, src_.substr(start, pos_ - start));
            return;
        }
        throw ParseError(std::string("unexpected character '") + c + "'", line_, col_);
    }

    void lex_int() {
        size_t start = pos_;
        if (src_[pos_] == '-') bump();
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) bump();
        Token t = mk(Tok::Int, src_.substr(start, pos_ - start));
        errno = 0;
        t.ival = std::strtoll(t.text.c_str(), nullptr, 10);
        if (errno) throw ParseError("integer out of 64-bit range", t.line, t.col);
        cur_ = t;
    }

    void lex_hex() {
        bump(); bump();  // 0x
        size_t start = pos_;
        while (pos_ < src_.size() && std::isxdigit(static_cast<unsigned char>(src_[pos_]))) bump();
        if (pos_ == start) throw ParseError("empty hex literal", line_, col_);
        cur_ = mk(Tok::Hex, src_.substr(start, pos_ - start));
    }

    void lex_string() {
        int ln = line_, cl = col_;
        bump();  // opening quote
        std::string out;
        while (true) {
            if (pos_ >= src_.size()) throw ParseError("unterminated string", ln, cl);
            char c = src_[pos_];
            bump();
            if (c == '"') break;
            if (c == '\\') {
                if (pos_ >= src_.size()) throw ParseError("unterminated escape", ln, cl);
                char e = src_[pos_];
                bump();
                switch (e) {
                    case '"': out.push_back('"'); break;
                    case '\\': out.push_back('\\'); break;
                    case 'n': out.push_back('\n'); break;
                    case 't': out.push_back('\t'); break;
                    case 'r': out.push_back('\r'); break;
                    default: throw ParseError("bad escape", ln, cl);
                }
            } else {
                out.push_back(c);
            }
        }
        Token t;
        t.kind = Tok::Str;
        t.text = out;
        t.line = ln;
        t.col = cl;
        cur_ = t;
    }

    void skip_ws() {
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (c == '#') {
                while (pos_ < src_.size() && src_[pos_] != '\n') bump();
            } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                bump();
            } else {
                break;
            }
        }
    }

    void bump() {
        if (src_[pos_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++pos_;
    }

    Token mk(Tok k, std::string text) {
        Token t;
        t.kind = k;
        t.text = std::move(text);
        t.line = cur_.line;
        t.col = cur_.col;
        return t;
    }

    const std::string& src_;
    size_t pos_ = 0;
    int line_ = 1, col_ = 1;
    Token cur_;
};

class Parser {
public:
    explicit Parser(const std::string& src) : lex_(src) {}

    FormulaPtr parse() {
        FormulaPtr f = formula();
        expect(Tok::End, "end of input");
        check_arities(f);
        return f;
    }

    Value parse_literal_only() {
        Value v = literal();
        expect(Tok::End, "end of input");
        return v;
    }

private:
    Lexer lex_;
    std::map<std::string, int> arity_seen_;

    [[noreturn]] void fail(const std::string& msg) {
        const Token& t = lex_.peek();
        throw ParseError(msg + " (got '" + (t.kind == Tok::End ? "<eof>" : t.text) + "')",
                         t.line, t.col);
    }

    Token expect(Tok k, const char* what) {
        if (lex_.peek().kind != k) fail(std::string("expected ") + what);
        return lex_.take();
    }

    bool at_ident(const char* kw) const {
        return lex_.peek().kind == Tok::Ident && lex_.peek().text == kw;
    }

    FormulaPtr formula() {  // or-chain
        FormulaPtr left = and_chain();
        while (at_ident("or")) {
            lex_.take();
            left = f_or(left, and_chain());
        }
        return left;
    }

    FormulaPtr and_chain() {
        FormulaPtr left = unit();
        while (at_ident("and")) {
            lex_.take();
            left = f_and(left, unit());
        }
        return left;
    }

    FormulaPtr unit() {
        const Token& t = lex_.peek();
        if (t.kind == Tok::LParen) {
            lex_.take();
            FormulaPtr f = formula();
            expect(Tok::RParen, "')'");
            return f;
        }
        if (t.kind == Tok::Ident) {
            if (t.text == "true") { lex_.take(); return f_true(); }
            if (t.text == "false") { lex_.take(); return f_false(); }
            if (t.text == "forall") return quantifier(true);
            if (t.text == "exists") return quantifier(false);
            if (t.text == "notin") return f_atom(notin_atom());
        }
        return f_atom(atom());
    }

    FormulaPtr quantifier(bool universal) {
        lex_.take();  // forall / exists
        std::vector<std::string> vars = var_list();
        expect(Tok::Dot, "'.'");
        expect(Tok::LParen, "'('");
        FormulaPtr first = formula();
        if (universal) {
            expect(Tok::Arrow, "'->'");
            GuardPtr g = formula_to_guard(first);
            FormulaPtr body = formula();
            expect(Tok::RParen, "')'");
            return f_forall(std::move(vars), std::move(g), std::move(body));
        }
        expect(Tok::RParen, "')'");
        // last top-level conjunct is the nested formula
        if (auto* n = std::get_if<FAnd>(&first->node))
            return f_exists(std::move(vars), formula_to_guard(n->l), n->r);
        return f_exists(std::move(vars), formula_to_guard(first), f_true());
    }

    std::vector<std::string> var_list() {
        std::vector<std::string> vars;
        vars.push_back(expect(Tok::Ident, "variable").text);
        while (lex_.peek().kind == Tok::Comma) {
            lex_.take();
            vars.push_back(expect(Tok::Ident, "variable").text);
        }
        return vars;
    }

    Atom atom() {
        const Token& t = lex_.peek();
        if (t.kind == Tok::Ident && !is_literal_start(t)) {
            Token name = lex_.take();
            if (lex_.peek().kind == Tok::LParen) return pred_atom(name.text);
            // bare identifier: must be the left side of an equality
            Term lhs = Term::variable(name.text);
            expect(Tok::Eq, "'=' or '('");
            return EqAtom{lhs, term()};
        }
        Term lhs = term();
        expect(Tok::Eq, "'='");
        return EqAtom{lhs, term()};
    }

    Atom pred_atom(const std::string& name) {
        expect(Tok::LParen, "'('");
        std::vector<Term> args;
        if (lex_.peek().kind != Tok::RParen) {
            args.push_back(term());
            while (lex_.peek().kind == Tok::Comma) {
                lex_.take();
                args.push_back(term());
            }
        }
        Token close = expect(Tok::RParen, "')'");
        if (name == "timeOrder") {
            if (args.size() != 4)
                throw ParseError("timeOrder takes 4 arguments", close.line, close.col);
            for (const Term* d : {&args[1], &args[3]})
                if (d->is_var())
                    throw ParseError("timeOrder displacement must be a constant",
                                     close.line, close.col);
            return TimeOrderAtom{args[0], args[1], args[2], args[3]};
        }
        auto [it, fresh] = arity_seen_.emplace(name, static_cast<int>(args.size()));
        if (!fresh && it->second != static_cast<int>(args.size()))
            throw ParseError("predicate " + name + " used with arity " +
                                 std::to_string(args.size()) + " after arity " +
                                 std::to_string(it->second),
                             close.line, close.col);
        return PredAtom{name, std::move(args)};
    }

    Atom notin_atom() {
        lex_.take();  // notin
        expect(Tok::LParen, "'('");
        expect(Tok::LParen, "'('");
        NotInAtom a;
        a.vars = var_list();
        expect(Tok::RParen, "')'");
        expect(Tok::Comma, "','");
        expect(Tok::LBrace, "'{'");
        while (lex_.peek().kind != Tok::RBrace) {
            expect(Tok::LParen, "'('");
            std::vector<BoundVal> tuple;
            tuple.push_back(bound_val());
            while (lex_.peek().kind == Tok::Comma) {
                lex_.take();
                tuple.push_back(bound_val());
            }
            Token close = expect(Tok::RParen, "')'");
            if (tuple.size() != a.vars.size())
                throw ParseError("notin tuple width mismatch", close.line, close.col);
            a.excluded.push_back(std::move(tuple));
            if (lex_.peek().kind == Tok::Comma) lex_.take();
        }
        expect(Tok::RBrace, "'}'");
        expect(Tok::RParen, "')'");
        return a;
    }

    BoundVal bound_val() {
        Value v = literal();
        expect(Tok::At, "'@'");
        return BoundVal{std::move(v), prov()};
    }

    Provenance prov() {
        std::string table = expect(Tok::Ident, "table name").text;
        expect(Tok::Dot, "'.'");
        Token col = expect(Tok::Int, "column index");
        return Provenance{table, static_cast<int>(col.ival)};
    }

    bool is_literal_start(const Token& t) const {
        return t.kind == Tok::Int || t.kind == Tok::Str || t.kind == Tok::Hex;
    }

    Term term() {
        const Token& t = lex_.peek();
        if (t.kind == Tok::Ident) return Term::variable(lex_.take().text);
        Value v = literal();
        std::optional<Provenance> origin;
        if (lex_.peek().kind == Tok::At) {
            lex_.take();
            origin = prov();
        }
        return Term::constant(std::move(v), std::move(origin));
    }

    Value literal() {
        const Token& t = lex_.peek();
        if (t.kind == Tok::Int) return Value::of_int(lex_.take().ival);
        if (t.kind == Tok::Str) return Value::of_str(lex_.take().text);
        if (t.kind == Tok::Hex) {
            Bytes first = from_hex(lex_.take().text);
            if (lex_.peek().kind == Tok::Colon) {
                lex_.take();
                Token second = expect(Tok::Hex, "hex cipher");
                return Value::kh(std::move(first), from_hex(second.text));
            }
            return Value::det(std::move(first));
        }
        fail("expected a constant");
    }

    void check_arities(const FormulaPtr&) {}  // arity consistency enforced while parsing
};

}  // namespace

FormulaPtr parse_policy(const std::string& text) { return Parser(text).parse(); }

}  // namespace encaudit
