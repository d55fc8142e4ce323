#pragma once

#include <string>
#include <string_view>

#include "bitup/query.hpp"

namespace bitup {

/// Parses the query text syntax:
///
///   expr      := or
///   or        := xor ( '|' xor )*
///   xor       := diff ( '^' diff )*
///   diff      := and ( '-' and )*
///   and       := primary ( '&' primary )*
///   primary   := '(' expr ')' | predicate
///   predicate := word '=' word | word '=' '{' word ( ',' word )* '}'
///
/// A bare word is a run of characters other than whitespace and
/// & | ^ ( ) = { } , " and may not start with '-'; anything else goes in
/// double quotes with \" and \\ escapes. `label={a,b}` means label=a | label=b.
/// Errors are ParseError with the byte column of the offending token.
QueryExpr parse_expr(std::string_view text);

/// Two-line rendering of a parse error: the input and a caret under the column.
std::string caret_diagnostic(std::string_view text, std::size_t column);

}  // namespace bitup
