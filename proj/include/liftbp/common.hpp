#pragma once

#include <stdexcept>
#include <string>

namespace liftbp {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// DSL syntax errors with source position (1-based line, 0 col = whole line).
struct ParseError : Error {
    int line;
    int col;
    ParseError(int line_, int col_, const std::string& msg)
        : Error("parse error at line " + std::to_string(line_) +
                (col_ > 0 ? ":" + std::to_string(col_) : "") + ": " + msg),
          line(line_), col(col_) {}
};

struct ValidationError : Error {
    using Error::Error;
};

// Domain / non-finite failures during forward evaluation.
struct EvalError : Error {
    std::string node;  // output variable of the offending function node
    EvalError(std::string node_, const std::string& msg)
        : Error("evaluation error at node '" + node_ + "': " + msg),
          node(std::move(node_)) {}
};

struct BPError : Error {
    using Error::Error;
};

}  // namespace liftbp
