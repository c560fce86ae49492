#pragma once

#include <span>
#include <string>
#include <vector>

#include "liftbp/common.hpp"

namespace liftbp {

// Variables are interned; VarId indexes FunctionNetwork::var_names in order
// of first mention.
using VarId = int;

enum class OpKind {
    Add, Sub, Mul, Div, Neg, PowConst, Exp, Log, Sin, Cos, Tanh,
    MulConst, AddConst
};

// A scalar primitive with exact evaluation and per-slot partial derivatives.
// PowConst/MulConst/AddConst carry their constant in `c` (DSL: pow:<c>,
// mulc:<c>, addc:<c>; pow2 is an alias for pow:2).
struct Primitive {
    OpKind kind = OpKind::Add;
    double c = 0.0;

    int arity() const;
    double eval(std::span<const double> args) const;
    double partial(int slot, std::span<const double> args) const;
    std::string token() const;

    // Returns false via *ok on an unknown token.
    static Primitive from_token(const std::string& tok, bool* ok);
};

struct FuncNode {
    VarId output = -1;
    Primitive op;
    std::vector<VarId> inputs;
};

struct FunctionNetwork {
    std::vector<std::string> var_names;   // index order = first mention
    std::vector<FuncNode> functions;      // declaration order
    std::vector<VarId> inputs;            // declaration order
    std::vector<double> input_value;      // per var; NaN for non-inputs
    std::vector<int> def_of;              // per var; function index or -1
    VarId objective = -1;

    int var_count() const { return static_cast<int>(var_names.size()); }
    const std::string& name(VarId v) const { return var_names[v]; }
    VarId find_var(const std::string& n) const;
    bool is_input(VarId v) const;
};

FunctionNetwork parse_network(const std::string& text);

// Emits DSL that re-parses to a structurally identical network.
std::string serialize_network(const FunctionNetwork& net);

struct ValidationReport {
    bool ok = true;
    std::vector<std::string> errors;
    std::vector<VarId> unreachable;  // legal; adjoints are 0
};

ValidationReport validate_network(const FunctionNetwork& net);
void require_valid(const FunctionNetwork& net);  // throws ValidationError

// Function indices; every node after all nodes defining its inputs, ties
// broken by declaration order.
std::vector<int> topo_order(const FunctionNetwork& net);

}  // namespace liftbp
