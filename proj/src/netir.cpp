#include "liftbp/netir.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <unordered_map>

namespace liftbp {

int Primitive::arity() const {
    switch (kind) {
        case OpKind::Add: case OpKind::Sub:
        case OpKind::Mul: case OpKind::Div:
            return 2;
        default:
            return 1;
    }
}

double Primitive::eval(std::span<const double> a) const {
    switch (kind) {
        case OpKind::Add: return a[0] + a[1];
        case OpKind::Sub: return a[0] - a[1];
        case OpKind::Mul: return a[0] * a[1];
        case OpKind::Div: return a[0] / a[1];
        case OpKind::Neg: return -a[0];
        case OpKind::PowConst: return std::pow(a[0], c);
        case OpKind::Exp: return std::exp(a[0]);
        case OpKind::Log: return std::log(a[0]);
        case OpKind::Sin: return std::sin(a[0]);
        case OpKind::Cos: return std::cos(a[0]);
        case OpKind::Tanh: return std::tanh(a[0]);
        case OpKind::MulConst: return c * a[0];
        case OpKind::AddConst: return c + a[0];
    }
    return 0.0;
}

double Primitive::partial(int slot, std::span<const double> a) const {
    switch (kind) {
        case OpKind::Add: return 1.0;
        case OpKind::Sub: return slot == 0 ? 1.0 : -1.0;
        case OpKind::Mul: return slot == 0 ? a[1] : a[0];
        case OpKind::Div: return slot == 0 ? 1.0 / a[1] : -a[0] / (a[1] * a[1]);
        case OpKind::Neg: return -1.0;
        case OpKind::PowConst: return c * std::pow(a[0], c - 1.0);
        case OpKind::Exp: return std::exp(a[0]);
        case OpKind::Log: return 1.0 / a[0];
        case OpKind::Sin: return std::cos(a[0]);
        case OpKind::Cos: return -std::sin(a[0]);
        case OpKind::Tanh: {
            double t = std::tanh(a[0]);
            return 1.0 - t * t;
        }
        case OpKind::MulConst: return c;
        case OpKind::AddConst: return 1.0;
    }
    return 0.0;
}

namespace {

std::string format_const(double c) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", c);
    return buf;
}

bool parse_double(const std::string& s, double* out) {
    if (s.empty()) return false;
    char* end = nullptr;
    *out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size() && std::isfinite(*out);
}

}  // namespace

std::string Primitive::token() const {
    switch (kind) {
        case OpKind::Add: return "add";
        case OpKind::Sub: return "sub";
        case OpKind::Mul: return "mul";
        case OpKind::Div: return "div";
        case OpKind::Neg: return "neg";
        case OpKind::PowConst: return "pow:" + format_const(c);
        case OpKind::Exp: return "exp";
        case OpKind::Log: return "log";
        case OpKind::Sin: return "sin";
        case OpKind::Cos: return "cos";
        case OpKind::Tanh: return "tanh";
        case OpKind::MulConst: return "mulc:" + format_const(c);
        case OpKind::AddConst: return "addc:" + format_const(c);
    }
    return "?";
}

Primitive Primitive::from_token(const std::string& tok, bool* ok) {
    *ok = true;
    if (tok == "add") return {OpKind::Add};
    if (tok == "sub") return {OpKind::Sub};
    if (tok == "mul") return {OpKind::Mul};
    if (tok == "div") return {OpKind::Div};
    if (tok == "neg") return {OpKind::Neg};
    if (tok == "exp") return {OpKind::Exp};
    if (tok == "log") return {OpKind::Log};
    if (tok == "sin") return {OpKind::Sin};
    if (tok == "cos") return {OpKind::Cos};
    if (tok == "tanh") return {OpKind::Tanh};
    if (tok == "pow2") return {OpKind::PowConst, 2.0};
    auto with_const = [&](const char* prefix, OpKind k) -> Primitive {
        std::string num = tok.substr(std::string(prefix).size());
        double c;
        if (!parse_double(num, &c)) {
            *ok = false;
            return {};
        }
        return {k, c};
    };
    if (tok.rfind("pow:", 0) == 0) return with_const("pow:", OpKind::PowConst);
    if (tok.rfind("mulc:", 0) == 0) return with_const("mulc:", OpKind::MulConst);
    if (tok.rfind("addc:", 0) == 0) return with_const("addc:", OpKind::AddConst);
    *ok = false;
    return {};
}

VarId FunctionNetwork::find_var(const std::string& n) const {
    for (int i = 0; i < var_count(); ++i)
        if (var_names[i] == n) return i;
    return -1;
}

bool FunctionNetwork::is_input(VarId v) const {
    return v >= 0 && v < var_count() && !std::isnan(input_value[v]) &&
           def_of[v] < 0;
}

namespace {

struct LineScanner {
    const std::string& s;
    int line;
    size_t pos = 0;

    void skip_ws() {
        while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
    }
    bool done() {
        skip_ws();
        return pos >= s.size();
    }
    int col() const { return static_cast<int>(pos) + 1; }

    std::string ident() {
        skip_ws();
        size_t start = pos;
        while (pos < s.size() &&
               (std::isalnum(static_cast<unsigned char>(s[pos])) ||
                s[pos] == '_' || s[pos] == ':' || s[pos] == '.' ||
                s[pos] == '+' || s[pos] == '-'))
            ++pos;
        return s.substr(start, pos - start);
    }
    bool expect(char ch) {
        skip_ws();
        if (pos < s.size() && s[pos] == ch) {
            ++pos;
            return true;
        }
        return false;
    }
};

bool valid_name(const std::string& n) {
    if (n.empty()) return false;
    if (!std::isalpha(static_cast<unsigned char>(n[0])) && n[0] != '_')
        return false;
    for (char ch : n)
        if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '_')
            return false;
    return n != "input" && n != "objective";
}

}  // namespace

FunctionNetwork parse_network(const std::string& text) {
    FunctionNetwork net;
    std::unordered_map<std::string, VarId> index;
    auto intern = [&](const std::string& n) -> VarId {
        auto it = index.find(n);
        if (it != index.end()) return it->second;
        VarId v = net.var_count();
        index.emplace(n, v);
        net.var_names.push_back(n);
        net.input_value.push_back(std::numeric_limits<double>::quiet_NaN());
        net.def_of.push_back(-1);
        return v;
    };

    std::istringstream in(text);
    std::string raw;
    int lineno = 0;
    bool have_objective = false;
    std::string objective_name;
    int objective_line = 0;

    while (std::getline(in, raw)) {
        ++lineno;
        if (auto hash = raw.find('#'); hash != std::string::npos)
            raw.resize(hash);
        LineScanner sc{raw, lineno};
        if (sc.done()) continue;

        std::string first = sc.ident();
        if (first == "input") {
            int c = sc.col();
            std::string name = sc.ident();
            if (!valid_name(name))
                throw ParseError(lineno, c, "expected variable name after 'input'");
            if (!sc.expect('='))
                throw ParseError(lineno, sc.col(), "expected '=' in input declaration");
            std::string num = sc.ident();
            double value;
            if (!parse_double(num, &value))
                throw ParseError(lineno, sc.col(), "expected finite numeric value");
            if (!sc.done())
                throw ParseError(lineno, sc.col(), "trailing characters");
            VarId v = intern(name);
            if (!std::isnan(net.input_value[v]) || net.def_of[v] >= 0)
                throw ParseError(lineno, c, "duplicate definition of '" + name + "'");
            net.input_value[v] = value;
            net.inputs.push_back(v);
            continue;
        }
        if (first == "objective") {
            int c = sc.col();
            std::string name = sc.ident();
            if (!valid_name(name))
                throw ParseError(lineno, c, "expected variable name after 'objective'");
            if (!sc.done())
                throw ParseError(lineno, sc.col(), "trailing characters");
            if (have_objective)
                throw ParseError(lineno, c, "objective already declared");
            have_objective = true;
            objective_name = name;
            objective_line = lineno;
            continue;
        }

        // <name> = <prim>(<name>{, <name>})
        if (!valid_name(first))
            throw ParseError(lineno, 1, "expected statement");
        if (!sc.expect('='))
            throw ParseError(lineno, sc.col(), "expected '='");
        int prim_col = sc.col();
        std::string prim_tok = sc.ident();
        bool ok = false;
        Primitive op = Primitive::from_token(prim_tok, &ok);
        if (!ok)
            throw ParseError(lineno, prim_col, "unknown primitive '" + prim_tok + "'");
        if (!sc.expect('('))
            throw ParseError(lineno, sc.col(), "expected '('");
        std::vector<std::string> args;
        if (!sc.expect(')')) {
            while (true) {
                int ac = sc.col();
                std::string a = sc.ident();
                if (!valid_name(a))
                    throw ParseError(lineno, ac, "expected variable name");
                args.push_back(a);
                if (sc.expect(')')) break;
                if (!sc.expect(','))
                    throw ParseError(lineno, sc.col(), "expected ',' or ')'");
            }
        }
        if (!sc.done())
            throw ParseError(lineno, sc.col(), "trailing characters");
        if (static_cast<int>(args.size()) != op.arity())
            throw ParseError(lineno, prim_col,
                             "primitive '" + prim_tok + "' takes " +
                                 std::to_string(op.arity()) + " argument(s), got " +
                                 std::to_string(args.size()));
        for (const auto& a : args)
            if (a == first)
                throw ParseError(lineno, 1,
                                 "variable '" + first + "' refers to itself");

        FuncNode fn;
        fn.op = op;
        for (const auto& a : args) fn.inputs.push_back(intern(a));
        VarId out = intern(first);
        if (!std::isnan(net.input_value[out]) || net.def_of[out] >= 0)
            throw ParseError(lineno, 1, "duplicate definition of '" + first + "'");
        fn.output = out;
        net.def_of[out] = static_cast<int>(net.functions.size());
        net.functions.push_back(std::move(fn));
    }

    if (!have_objective)
        throw ParseError(lineno, 0, "missing 'objective' declaration");
    net.objective = net.find_var(objective_name);
    if (net.objective < 0)
        throw ParseError(objective_line, 0,
                         "objective '" + objective_name + "' is not a declared variable");
    return net;
}

std::string serialize_network(const FunctionNetwork& net) {
    std::ostringstream out;
    char buf[64];
    for (size_t i = 0; i < net.inputs.size(); ++i) {
        VarId v = net.inputs[i];
        std::snprintf(buf, sizeof buf, "%.17g", net.input_value[v]);
        out << "input " << net.name(v) << " = " << buf << "\n";
    }
    for (const auto& fn : net.functions) {
        out << net.name(fn.output) << " = " << fn.op.token() << "(";
        for (size_t i = 0; i < fn.inputs.size(); ++i) {
            if (i) out << ", ";
            out << net.name(fn.inputs[i]);
        }
        out << ")\n";
    }
    out << "objective " << net.name(net.objective) << "\n";
    return out.str();
}

ValidationReport validate_network(const FunctionNetwork& net) {
    ValidationReport rep;
    auto fail = [&](const std::string& msg) {
        rep.ok = false;
        rep.errors.push_back(msg);
    };

    for (int v = 0; v < net.var_count(); ++v) {
        bool defined = net.def_of[v] >= 0 || net.is_input(v);
        if (!defined)
            fail("variable '" + net.name(v) +
                 "' is used but never defined and not declared input");
    }
    if (net.objective < 0) {
        fail("no objective variable");
        return rep;
    }

    // Kahn over function nodes; any leftover nodes lie on a cycle.
    int nf = static_cast<int>(net.functions.size());
    std::vector<int> pending(nf, 0);
    std::vector<bool> var_ready(net.var_count(), false);
    for (VarId v : net.inputs) var_ready[v] = true;
    for (int v = 0; v < net.var_count(); ++v)
        if (net.def_of[v] < 0 && !net.is_input(v)) var_ready[v] = true;  // undefined: don't mask the cycle check
    std::vector<bool> done(nf, false);
    bool progress = true;
    int remaining = nf;
    while (progress && remaining > 0) {
        progress = false;
        for (int f = 0; f < nf; ++f) {
            if (done[f]) continue;
            bool ready = true;
            for (VarId in : net.functions[f].inputs)
                if (!var_ready[in]) { ready = false; break; }
            if (ready) {
                done[f] = true;
                var_ready[net.functions[f].output] = true;
                --remaining;
                progress = true;
            }
        }
    }
    if (remaining > 0) {
        std::string cyc = "cycle detected involving:";
        for (int f = 0; f < nf; ++f)
            if (!done[f]) cyc += " " + net.name(net.functions[f].output);
        fail(cyc);
    }

    // Ancestors of the objective (variables with a directed path to it).
    std::vector<bool> reaches(net.var_count(), false);
    reaches[net.objective] = true;
    if (remaining == 0) {
        bool changed = true;
        while (changed) {
            changed = false;
            for (const auto& fn : net.functions) {
                if (!reaches[fn.output]) continue;
                for (VarId in : fn.inputs)
                    if (!reaches[in]) { reaches[in] = true; changed = true; }
            }
        }
    }
    for (int v = 0; v < net.var_count(); ++v)
        if (!reaches[v]) rep.unreachable.push_back(v);
    return rep;
}

void require_valid(const FunctionNetwork& net) {
    ValidationReport rep = validate_network(net);
    if (!rep.ok) {
        std::string msg = "invalid network:";
        for (const auto& e : rep.errors) msg += "\n  " + e;
        throw ValidationError(msg);
    }
}

std::vector<int> topo_order(const FunctionNetwork& net) {
    int nf = static_cast<int>(net.functions.size());
    std::vector<bool> var_ready(net.var_count(), false);
    for (int v = 0; v < net.var_count(); ++v)
        if (net.def_of[v] < 0) var_ready[v] = true;
    std::vector<bool> done(nf, false);
    std::vector<int> order;
    order.reserve(nf);
    while (static_cast<int>(order.size()) < nf) {
        bool progress = false;
        for (int f = 0; f < nf; ++f) {
            if (done[f]) continue;
            bool ready = true;
            for (VarId in : net.functions[f].inputs)
                if (!var_ready[in]) { ready = false; break; }
            if (ready) {
                done[f] = true;
                var_ready[net.functions[f].output] = true;
                order.push_back(f);
                progress = true;
                break;  // restart scan so ties go to declaration order
            }
        }
        if (!progress)
            throw ValidationError("topo_order on cyclic network");
    }
    return order;
}

}  // namespace liftbp
