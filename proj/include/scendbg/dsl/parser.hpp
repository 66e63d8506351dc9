#pragma once

#include <string>
#include <string_view>

#include "scendbg/dsl/ast.hpp"

namespace scendbg::dsl {

/// Parses and validates a scenario program.
///
/// Grammar (see docs/dsl.md for the EBNF):
///   param NAME = uniform(a, b) | range(a, b) | choice("v", ...) | literal
///   NAME = car(x: value, y: value, heading: value, model: dist, color: (d, d, d))
///   require BOOLEXPR
/// `#` starts a line comment. Distribution arguments may be constant
/// arithmetic expressions; they are folded at parse time.
///
/// Throws SyntaxError (with line/column) or ValidationError.
ScenarioProgram parse(std::string_view source);

/// Canonical text form; parse(emit(p)) is structurally equal to p.
std::string emit(const ScenarioProgram& program);

/// Shortest round-trip decimal rendering used across all emitted artifacts.
std::string format_number(double v);

/// Validates program invariants (unique names, ego first, references declared
/// earlier, types); parse() already calls this.
void validate(const ScenarioProgram& program);

}  // namespace scendbg::dsl
