// Copyright 2026 The edgefuzz Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "edgefuzz/miner.h"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <optional>
#include <set>
#include <system_error>
#include <utility>

namespace edgefuzz::miner {
namespace {

bool IsSpace(char c) { return std::isspace(static_cast<unsigned char>(c)); }

// Identifier characters immediately before `pos`.
std::string_view TokenBefore(std::string_view s, size_t pos) {
  size_t b = pos;
  while (b > 0 && IsIdentChar(s[b - 1])) --b;
  return s.substr(b, pos - b);
}

// Strips comments and preprocessor directives; string and char literal
// contents too when `strip_literals` is set.
std::string StripImpl(std::string_view src, bool strip_literals) {
  std::string out(src);
  const size_t n = src.size();
  auto blank = [&](size_t k) {
    if (out[k] != '\n') out[k] = ' ';
  };
  auto blank_block_comment = [&](size_t &i) {
    blank(i);
    blank(i + 1);
    i += 2;
    while (i < n && !(src[i] == '*' && i + 1 < n && src[i + 1] == '/')) {
      blank(i);
      ++i;
    }
    if (i < n) {
      blank(i);
      blank(i + 1);
      i += 2;
    }
  };
  auto skip_quoted = [&](size_t &i, char quote) {
    ++i;
    while (i < n && src[i] != quote && src[i] != '\n') {
      if (src[i] == '\\' && i + 1 < n) {
        if (strip_literals) {
          blank(i);
          blank(i + 1);
        }
        i += 2;
        continue;
      }
      if (strip_literals) blank(i);
      ++i;
    }
    if (i < n && src[i] == quote) ++i;
  };

  size_t i = 0;
  bool at_line_start = true;
  while (i < n) {
    const char c = src[i];
    if (c == '\n') {
      at_line_start = true;
      ++i;
      continue;
    }
    if (at_line_start && c == '#') {
      while (i < n && src[i] != '\n') {
        if (src[i] == '\\' && i + 1 < n && src[i + 1] == '\n') {
          blank(i);
          i += 2;
          continue;
        }
        if (src[i] == '/' && i + 1 < n && src[i + 1] == '*') {
          blank_block_comment(i);
          continue;
        }
        blank(i);
        ++i;
      }
      continue;
    }
    if (!IsSpace(c)) at_line_start = false;
    if (c == '/' && i + 1 < n && src[i + 1] == '/') {
      while (i < n && src[i] != '\n') {
        blank(i);
        ++i;
      }
      continue;
    }
    if (c == '/' && i + 1 < n && src[i + 1] == '*') {
      blank_block_comment(i);
      continue;
    }
    if (c == '"') {
      std::string_view prefix = TokenBefore(src, i);
      if (prefix == "R" || prefix == "u8R" || prefix == "uR" ||
          prefix == "UR" || prefix == "LR") {
        size_t open = src.find('(', i + 1);
        if (open != std::string_view::npos) {
          std::string close = ")" + std::string(src.substr(i + 1, open - i - 1)) + "\"";
          size_t end = src.find(close, open + 1);
          size_t stop = end == std::string_view::npos ? n : end + close.size() - 1;
          if (strip_literals)
            for (size_t k = i + 1; k < stop; ++k) blank(k);
          i = std::min(n, stop + 1);
          continue;
        }
      }
      skip_quoted(i, '"');
      continue;
    }
    if (c == '\'') {
      std::string_view prefix = TokenBefore(src, i);
      if (!prefix.empty() && std::isdigit(static_cast<unsigned char>(prefix[0]))) {
        ++i;  // digit separator
        continue;
      }
      skip_quoted(i, '\'');
      continue;
    }
    ++i;
  }
  return out;
}

class LineIndex {
 public:
  explicit LineIndex(std::string_view text) {
    starts_.push_back(0);
    for (size_t i = 0; i < text.size(); ++i)
      if (text[i] == '\n') starts_.push_back(i + 1);
  }
  int LineOf(size_t offset) const {
    return static_cast<int>(
        std::upper_bound(starts_.begin(), starts_.end(), offset) -
        starts_.begin());
  }

 private:
  std::vector<size_t> starts_;
};

size_t MatchParen(std::string_view s, size_t open) {
  int depth = 0;
  for (size_t i = open; i < s.size(); ++i) {
    if (s[i] == '(') ++depth;
    if (s[i] == ')' && --depth == 0) return i;
  }
  return std::string_view::npos;
}

struct RawSite {
  size_t begin;
  size_t end;  // one past the closing paren
  std::string macro;
};

std::vector<RawSite> FindMacroSites(std::string_view stripped,
                                    const std::vector<std::string> &macros,
                                    std::string_view file,
                                    const LineIndex &lines, int line_offset,
                                    WarningLog *warnings) {
  std::vector<RawSite> sites;
  size_t i = 0;
  const size_t n = stripped.size();
  while (i < n) {
    if (!IsIdentStart(stripped[i]) || (i > 0 && IsIdentChar(stripped[i - 1]))) {
      ++i;
      continue;
    }
    size_t end = i;
    while (end < n && IsIdentChar(stripped[end])) ++end;
    std::string_view tok = stripped.substr(i, end - i);
    if (std::find(macros.begin(), macros.end(), tok) != macros.end()) {
      size_t p = end;
      while (p < n && IsSpace(stripped[p])) ++p;
      if (p < n && stripped[p] == '(') {
        size_t close = MatchParen(stripped, p);
        if (close == std::string_view::npos) {
          if (warnings)
            warnings->Add("mine",
                          std::string(file) + ":" +
                              std::to_string(lines.LineOf(i) + line_offset),
                          "unbalanced parentheses in " + std::string(tok) +
                              " invocation; site skipped");
        } else {
          sites.push_back({i, close + 1, std::string(tok)});
        }
      }
    }
    i = end;
  }
  return sites;
}

// ---------------------------------------------------------------------------
// Header parsing.

bool IsTypeKeyword(std::string_view w) {
  static const std::set<std::string_view> kWords = {
      "int",   "char",     "long",  "short", "unsigned", "signed",
      "double", "float",   "bool",  "void",  "auto",     "const",
      "volatile", "size_t", "int64_t", "int32_t", "uint64_t", "uint32_t"};
  return kWords.count(w) > 0;
}

// Index just past leading access specifiers, template<...> clauses and
// [[attributes]] of a declaration.
size_t SkipDeclarationPreamble(std::string_view s) {
  size_t i = 0;
  while (true) {
    while (i < s.size() && IsSpace(s[i])) ++i;
    bool advanced = false;
    for (std::string_view spec : {"public", "private", "protected"}) {
      if (s.substr(i, spec.size()) == spec) {
        size_t j = i + spec.size();
        while (j < s.size() && IsSpace(s[j])) ++j;
        if (j < s.size() && s[j] == ':' && (j + 1 >= s.size() || s[j + 1] != ':')) {
          i = j + 1;
          advanced = true;
          break;
        }
      }
    }
    if (advanced) continue;
    if (s.substr(i, 8) == "template" &&
        (i + 8 >= s.size() || !IsIdentChar(s[i + 8]))) {
      size_t j = i + 8;
      while (j < s.size() && IsSpace(s[j])) ++j;
      if (j < s.size() && s[j] == '<') {
        int depth = 0;
        for (; j < s.size(); ++j) {
          if (s[j] == '<') ++depth;
          if (s[j] == '>' && --depth == 0) break;
        }
        i = std::min(s.size(), j + 1);
        continue;
      }
    }
    if (s.substr(i, 2) == "[[") {
      size_t close = s.find("]]", i);
      if (close != std::string_view::npos) {
        i = close + 2;
        continue;
      }
    }
    return i;
  }
}

// True when the '<' at `pos` opens a template argument list.
bool OpensTemplateArgs(std::string_view s, size_t pos) {
  size_t b = pos;
  while (b > 0 && IsSpace(s[b - 1])) --b;
  std::string_view tok = TokenBefore(s, b);
  return !tok.empty() && tok != "operator" &&
         !std::isdigit(static_cast<unsigned char>(tok[0]));
}

// Top-level (outside <>) paren groups as (open, close) index pairs.
std::vector<std::pair<size_t, size_t>> TopLevelParenGroups(std::string_view s) {
  std::vector<std::pair<size_t, size_t>> groups;
  int angle = 0;
  for (size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if (c == '<' && OpensTemplateArgs(s, i)) {
      ++angle;
    } else if (c == '>' && angle > 0 && !(i > 0 && s[i - 1] == '-')) {
      --angle;
    } else if (c == '(' && angle == 0) {
      size_t close = MatchParen(s, i);
      if (close == std::string_view::npos) break;
      groups.emplace_back(i, close);
      i = close;
    }
  }
  return groups;
}

// True when `tail` (text following a candidate parameter list) holds only
// qualifiers, a trailing return type or a constructor initializer list.
bool IsHeaderTail(std::string_view tail) {
  std::string t = Trim(tail);
  while (!t.empty()) {
    if (t.rfind("->", 0) == 0) return true;
    if (t[0] == ':' && (t.size() < 2 || t[1] != ':')) return true;
    if (t[0] == '&') {
      t = Trim(std::string_view(t).substr(t.size() > 1 && t[1] == '&' ? 2 : 1));
      continue;
    }
    size_t end = 0;
    while (end < t.size() && IsIdentChar(t[end])) ++end;
    std::string_view word = std::string_view(t).substr(0, end);
    if (word == "const" || word == "volatile" || word == "override" ||
        word == "final" || word == "mutable") {
      t = Trim(std::string_view(t).substr(end));
      continue;
    }
    if (word == "noexcept" || word == "throw") {
      std::string rest = Trim(std::string_view(t).substr(end));
      if (!rest.empty() && rest[0] == '(') {
        size_t close = MatchParen(rest, 0);
        if (close == std::string::npos) return false;
        rest = Trim(std::string_view(rest).substr(close + 1));
      }
      t = rest;
      continue;
    }
    return false;
  }
  return true;
}

std::vector<std::string> SplitTopLevelCommas(std::string_view s) {
  std::vector<std::string> parts;
  int depth = 0;
  size_t start = 0;
  for (size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if (c == '(' || c == '[' || c == '{') ++depth;
    if (c == ')' || c == ']' || c == '}') --depth;
    if (c == '<' && OpensTemplateArgs(s, i)) ++depth;
    if (c == '>' && depth > 0 && !(i > 0 && s[i - 1] == '-')) --depth;
    if (c == ',' && depth == 0) {
      parts.emplace_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  parts.emplace_back(s.substr(start));
  return parts;
}

size_t FindTopLevel(std::string_view s, char target) {
  int depth = 0;
  for (size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if (c == '(' || c == '[' || c == '{') ++depth;
    if (c == ')' || c == ']' || c == '}') --depth;
    if (c == '<' && OpensTemplateArgs(s, i)) ++depth;
    if (c == '>' && depth > 0 && !(i > 0 && s[i - 1] == '-')) --depth;
    if (c == target && depth == 0) return i;
  }
  return std::string_view::npos;
}

// Parses one parameter declaration. Returns nullopt for unnamed parameters;
// sets `error` when the declaration cannot be split.
std::optional<Parameter> ParseParameter(std::string_view text,
                                        std::string *error) {
  std::string decl = Trim(text);
  size_t eq = FindTopLevel(decl, '=');
  if (eq != std::string_view::npos) decl = Trim(std::string_view(decl).substr(0, eq));
  if (decl.empty() || decl == "void" || decl == "...") return std::nullopt;
  if (decl.find('(') != std::string::npos) {
    *error = "parameter with a function declarator: " + decl;
    return std::nullopt;
  }
  while (!decl.empty() && decl.back() == ']') {
    size_t open = decl.rfind('[');
    if (open == std::string::npos) break;
    decl = Trim(std::string_view(decl).substr(0, open));
  }
  size_t end = decl.size();
  size_t b = end;
  while (b > 0 && IsIdentChar(decl[b - 1])) --b;
  std::string name = decl.substr(b);
  std::string type = Trim(std::string_view(decl).substr(0, b));
  if (!IsIdentifier(name) || type.empty() || IsTypeKeyword(name) ||
      type.back() == ':')
    return std::nullopt;
  return Parameter{name, CollapseWhitespace(type)};
}

}  // namespace

bool FunctionInterface::HasParameter(std::string_view param) const {
  return std::any_of(parameters.begin(), parameters.end(),
                     [&](const Parameter &p) { return p.name == param; });
}

std::string StripCommentsAndStrings(std::string_view source) {
  return StripImpl(source, /*strip_literals=*/true);
}

FunctionInterface ParseInterface(std::string_view header) {
  FunctionInterface iface;
  const std::string code = StripImpl(header, /*strip_literals=*/false);
  const std::string structural = StripCommentsAndStrings(header);
  const size_t start = SkipDeclarationPreamble(structural);
  iface.header_text = CollapseWhitespace(std::string_view(code).substr(start));

  const std::string_view s = std::string_view(structural).substr(start);
  const std::string_view text = std::string_view(code).substr(start);
  auto groups = TopLevelParenGroups(s);
  std::optional<std::pair<size_t, size_t>> params;
  for (const auto &g : groups) {
    size_t b = g.first;
    while (b > 0 && IsSpace(s[b - 1])) --b;
    if (b == 0) continue;
    if (IsHeaderTail(s.substr(g.second + 1))) {
      params = g;
      break;
    }
  }
  if (!params) {
    iface.ambiguous = true;
    iface.ambiguity = "no parameter list found";
    return iface;
  }

  // Function name: a macro-style head `MACRO(x)` or a qualified id.
  size_t name_end = params->first;
  while (name_end > 0 && IsSpace(s[name_end - 1])) --name_end;
  size_t name_begin = name_end;
  if (s[name_end - 1] == ')') {
    int depth = 0;
    size_t k = name_end;
    while (k > 0) {
      --k;
      if (s[k] == ')') ++depth;
      if (s[k] == '(' && --depth == 0) break;
    }
    while (k > 0 && IsSpace(s[k - 1])) --k;
    name_begin = k;
    while (name_begin > 0 && IsIdentChar(s[name_begin - 1])) --name_begin;
  } else {
    size_t op = s.substr(0, name_end).rfind("operator");
    if (op != std::string_view::npos &&
        (op == 0 || !IsIdentChar(s[op - 1])) &&
        std::all_of(s.begin() + op + 8, s.begin() + name_end,
                    [](char c) { return !IsIdentChar(c); })) {
      name_begin = op;
    }
    while (name_begin > 0 &&
           (IsIdentChar(s[name_begin - 1]) || s[name_begin - 1] == ':' ||
            s[name_begin - 1] == '~'))
      --name_begin;
  }
  iface.name = CollapseWhitespace(text.substr(name_begin, name_end - name_begin));
  if (iface.name.empty()) {
    iface.ambiguous = true;
    iface.ambiguity = "no function name before parameter list";
    return iface;
  }

  // Return type; a stray `)` means an earlier macro ran into this
  // declaration, so restart after it.
  std::string_view ret = s.substr(0, name_begin);
  size_t ret_start = 0;
  {
    int depth = 0;
    for (size_t k = 0; k < ret.size(); ++k) {
      if (ret[k] == '(') ++depth;
      if (ret[k] == ')' && --depth == 0) ret_start = k + 1;
    }
  }
  iface.return_type =
      CollapseWhitespace(text.substr(ret_start, name_begin - ret_start));
  if (ret_start > 0) iface.header_text = CollapseWhitespace(text.substr(ret_start));

  std::string_view inner =
      s.substr(params->first + 1, params->second - params->first - 1);
  std::string_view inner_text =
      text.substr(params->first + 1, params->second - params->first - 1);
  size_t offset = 0;
  for (const std::string &part : SplitTopLevelCommas(inner)) {
    std::string error;
    auto p = ParseParameter(inner_text.substr(offset, part.size()), &error);
    offset += part.size() + 1;
    if (!error.empty()) {
      iface.ambiguous = true;
      iface.ambiguity = error;
      continue;
    }
    if (!p) continue;
    if (iface.HasParameter(p->name)) {
      iface.ambiguous = true;
      iface.ambiguity = "duplicate parameter name " + p->name;
      continue;
    }
    iface.parameters.push_back(std::move(*p));
  }
  return iface;
}

namespace {

enum class ScopeKind { kNamespace, kClass, kFunction, kBlock, kInline };

std::string_view FirstWord(std::string_view s, size_t *after = nullptr) {
  size_t i = 0;
  while (i < s.size() && IsSpace(s[i])) ++i;
  size_t b = i;
  while (i < s.size() && IsIdentChar(s[i])) ++i;
  if (after) *after = i;
  return s.substr(b, i - b);
}

ScopeKind ClassifyBrace(std::string_view prefix) {
  std::string_view p = prefix.substr(SkipDeclarationPreamble(prefix));
  std::string trimmed = Trim(p);
  if (trimmed.empty()) return ScopeKind::kBlock;
  size_t after = 0;
  std::string_view first = FirstWord(trimmed, &after);
  if (first == "namespace") return ScopeKind::kNamespace;
  if (first == "inline" && FirstWord(std::string_view(trimmed).substr(after)) == "namespace")
    return ScopeKind::kNamespace;
  const bool has_paren = !TopLevelParenGroups(trimmed).empty();
  if (first == "extern" && !has_paren) return ScopeKind::kNamespace;
  if (first == "enum") return ScopeKind::kBlock;
  if (first == "class" || first == "struct" || first == "union")
    return ScopeKind::kClass;
  if (!has_paren) return ScopeKind::kBlock;

  const char last = trimmed.back();
  auto groups = TopLevelParenGroups(trimmed);
  // Brace-initialized member in a constructor initializer list: `) : x_{`.
  for (size_t k = groups.front().second + 1; k < trimmed.size(); ++k) {
    const bool single_colon = trimmed[k] == ':' &&
                              (k + 1 >= trimmed.size() || trimmed[k + 1] != ':') &&
                              trimmed[k - 1] != ':';
    if (single_colon) {
      if (IsIdentChar(last) || last == '>') return ScopeKind::kInline;
      break;
    }
  }
  // `auto f = [](...) {` and friends.
  size_t eq = trimmed.find('=');
  if (eq != std::string::npos && eq < groups.front().first) {
    std::string_view before = std::string_view(trimmed).substr(0, eq);
    bool is_operator = Trim(before).size() >= 8 &&
                       Trim(before).rfind("operator") == Trim(before).size() - 8;
    bool comparison = eq + 1 < trimmed.size() && trimmed[eq + 1] == '=';
    if (!is_operator && !comparison) return ScopeKind::kBlock;
  }
  if (last == ')' || last == '}' || IsIdentChar(last) || last == '&' ||
      last == '>' || last == ']')
    return ScopeKind::kFunction;
  return ScopeKind::kBlock;
}

struct OpenScope {
  ScopeKind kind;
  size_t header_start;
};

}  // namespace

FileScan ScanFile(std::string_view file_path, std::string_view contents,
                  const std::vector<std::string> &macros,
                  WarningLog *warnings) {
  FileScan scan;
  const std::string stripped = StripCommentsAndStrings(contents);
  const LineIndex lines(contents);
  const size_t n = stripped.size();

  struct FunctionRange {
    size_t begin;
    size_t end;
  };
  std::vector<FunctionRange> ranges;  // parallel to scan.functions

  std::vector<OpenScope> stack;
  size_t stmt_start = 0;
  int paren_depth = 0;
  bool in_function = false;
  for (size_t i = 0; i < n; ++i) {
    const char c = stripped[i];
    if (in_function) {
      if (c == '{') {
        stack.push_back({ScopeKind::kBlock, i});
      } else if (c == '}' && !stack.empty()) {
        const OpenScope top = stack.back();
        stack.pop_back();
        if (top.kind == ScopeKind::kFunction) {
          in_function = false;
          FunctionSource &fn = scan.functions.back();
          fn.text = std::string(contents.substr(top.header_start, i + 1 - top.header_start));
          fn.interface.end_line = lines.LineOf(i);
          ranges.push_back({top.header_start, i + 1});
          stmt_start = i + 1;
          paren_depth = 0;
        }
      }
      continue;
    }
    switch (c) {
      case '(':
        ++paren_depth;
        break;
      case ')':
        paren_depth = std::max(0, paren_depth - 1);
        break;
      case ';':
        if (paren_depth == 0) stmt_start = i + 1;
        break;
      case '{': {
        const bool nested_in_expression =
            paren_depth > 0 ||
            (!stack.empty() && (stack.back().kind == ScopeKind::kBlock ||
                                stack.back().kind == ScopeKind::kInline));
        const ScopeKind kind =
            nested_in_expression
                ? ScopeKind::kInline
                : ClassifyBrace(std::string_view(stripped).substr(stmt_start, i - stmt_start));
        size_t header_start = stmt_start;
        if (kind == ScopeKind::kFunction) {
          header_start += SkipDeclarationPreamble(
              std::string_view(stripped).substr(stmt_start, i - stmt_start));
          while (header_start < i && IsSpace(stripped[header_start])) ++header_start;
          FunctionSource fn;
          fn.interface = ParseInterface(contents.substr(header_start, i - header_start));
          fn.interface.start_line = lines.LineOf(header_start);
          scan.functions.push_back(std::move(fn));
          in_function = true;
        }
        stack.push_back({kind, header_start});
        if (kind != ScopeKind::kInline) stmt_start = i + 1;
        break;
      }
      case '}': {
        if (stack.empty()) break;
        const OpenScope top = stack.back();
        stack.pop_back();
        if (top.kind != ScopeKind::kInline) stmt_start = i + 1;
        break;
      }
      default:
        break;
    }
  }
  // A body still open at end of file is dropped.
  if (in_function) scan.functions.pop_back();

  for (const RawSite &raw :
       FindMacroSites(stripped, macros, file_path, lines, 0, warnings)) {
    CheckSite site;
    site.file_path = std::string(file_path);
    site.line = lines.LineOf(raw.begin);
    site.macro_name = raw.macro;
    site.raw_text = std::string(contents.substr(raw.begin, raw.end - raw.begin));
    for (size_t k = 0; k < ranges.size(); ++k) {
      if (raw.begin >= ranges[k].begin && raw.begin < ranges[k].end) {
        site.enclosing_function = scan.functions[k].interface.name;
        break;
      }
    }
    scan.sites.push_back(std::move(site));
  }
  return scan;
}

std::vector<CheckSite> ScanSources(const std::filesystem::path &root,
                                   const std::vector<std::string> &macros,
                                   const std::vector<std::string> &extensions,
                                   WarningLog *warnings, size_t threads) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(root, ec))
    throw IoError("source root is not a readable directory: " + root.string());
  std::vector<fs::path> files;
  for (auto it = fs::recursive_directory_iterator(
           root, fs::directory_options::skip_permission_denied, ec);
       !ec && it != fs::recursive_directory_iterator(); it.increment(ec)) {
    if (!it->is_regular_file()) continue;
    std::string ext = it->path().extension().string();
    if (std::find(extensions.begin(), extensions.end(), ext) != extensions.end())
      files.push_back(it->path());
  }
  if (ec) throw IoError("cannot walk " + root.string() + ": " + ec.message());
  std::sort(files.begin(), files.end());

  std::vector<std::vector<CheckSite>> per_file(files.size());
  ParallelFor(files.size(), threads, [&](size_t i) {
    std::string rel = fs::relative(files[i], root).generic_string();
    per_file[i] = ScanFile(rel, ReadFile(files[i]), macros, warnings).sites;
  });
  std::vector<CheckSite> sites;
  for (auto &v : per_file)
    for (auto &s : v) sites.push_back(std::move(s));
  std::stable_sort(sites.begin(), sites.end(),
                   [](const CheckSite &a, const CheckSite &b) {
                     return std::tie(a.file_path, a.line) <
                            std::tie(b.file_path, b.line);
                   });
  return sites;
}

std::string RenderBlockText(const FunctionInterface &interface,
                            const std::vector<CheckSite> &checks) {
  std::string out = interface.header_text + " {\n";
  for (const auto &c : checks) out += "  " + CollapseWhitespace(c.raw_text) + ";\n";
  out += "}\n";
  return out;
}

CheckBlock ExtractBlock(std::string_view function_text,
                        const FunctionInterface &interface,
                        const std::vector<std::string> &macros,
                        std::string_view file) {
  CheckBlock block;
  block.file = std::string(file);
  block.interface = interface;
  const std::string stripped = StripCommentsAndStrings(function_text);
  const LineIndex lines(function_text);
  for (const RawSite &raw : FindMacroSites(stripped, macros, file, lines,
                                           interface.start_line - 1, nullptr)) {
    CheckSite site;
    site.file_path = std::string(file);
    site.line = interface.start_line + lines.LineOf(raw.begin) - 1;
    site.macro_name = raw.macro;
    site.raw_text = std::string(function_text.substr(raw.begin, raw.end - raw.begin));
    site.enclosing_function = interface.name;
    block.checks.push_back(std::move(site));
  }
  block.block_text = RenderBlockText(block.interface, block.checks);
  return block;
}

bool ReferencesParameter(std::string_view check_text, std::string_view param) {
  const std::string text = StripCommentsAndStrings(check_text);
  // Skip the macro name itself.
  size_t open = text.find('(');
  std::string_view args =
      open == std::string::npos ? std::string_view(text) : std::string_view(text).substr(open);
  size_t pos = 0;
  while ((pos = args.find(param, pos)) != std::string_view::npos) {
    const size_t end = pos + param.size();
    const bool left_ok = pos == 0 || !IsIdentChar(args[pos - 1]);
    const bool right_ok = end >= args.size() || !IsIdentChar(args[end]);
    if (left_ok && right_ok) {
      size_t b = pos;
      while (b > 0 && IsSpace(args[b - 1])) --b;
      const bool member = b > 0 && (args[b - 1] == '.' ||
                                    (b > 1 && args[b - 2] == '-' && args[b - 1] == '>') ||
                                    (b > 1 && args[b - 2] == ':' && args[b - 1] == ':'));
      if (!member) return true;
    }
    pos = end;
  }
  return false;
}

CheckBlock FilterParamChecked(const CheckBlock &block) {
  CheckBlock out = block;
  out.checks.clear();
  for (const auto &check : block.checks) {
    for (const auto &p : block.interface.parameters) {
      if (ReferencesParameter(check.raw_text, p.name)) {
        out.checks.push_back(check);
        break;
      }
    }
  }
  out.block_text = RenderBlockText(out.interface, out.checks);
  return out;
}

std::vector<CheckBlock> MineTree(const std::filesystem::path &root,
                                 const MinerConfig &config,
                                 WarningLog *warnings) {
  namespace fs = std::filesystem;
  if (config.macros.empty()) throw ConfigError("miner: macro set is empty");
  std::error_code ec;
  if (!fs::is_directory(root, ec))
    throw IoError("source root is not a readable directory: " + root.string());
  std::vector<fs::path> files;
  for (auto it = fs::recursive_directory_iterator(
           root, fs::directory_options::skip_permission_denied, ec);
       !ec && it != fs::recursive_directory_iterator(); it.increment(ec)) {
    if (!it->is_regular_file()) continue;
    std::string ext = it->path().extension().string();
    if (std::find(config.extensions.begin(), config.extensions.end(), ext) !=
        config.extensions.end())
      files.push_back(it->path());
  }
  if (ec) throw IoError("cannot walk " + root.string() + ": " + ec.message());
  std::sort(files.begin(), files.end());

  std::vector<std::vector<CheckBlock>> per_file(files.size());
  ParallelFor(files.size(), config.threads, [&](size_t i) {
    const std::string rel = fs::relative(files[i], root).generic_string();
    const std::string contents = ReadFile(files[i]);
    FileScan scan = ScanFile(rel, contents, config.macros, warnings);
    for (const auto &fn : scan.functions) {
      const bool has_sites = std::any_of(
          scan.sites.begin(), scan.sites.end(), [&](const CheckSite &s) {
            return s.line >= fn.interface.start_line &&
                   s.line <= fn.interface.end_line &&
                   s.enclosing_function == fn.interface.name;
          });
      if (!has_sites) continue;
      if (fn.interface.ambiguous) {
        if (warnings)
          warnings->Add("mine", rel + ":" + std::to_string(fn.interface.start_line),
                        "ambiguous interface for " + fn.interface.name + ": " +
                            fn.interface.ambiguity + "; excluded");
        continue;
      }
      CheckBlock block = FilterParamChecked(
          ExtractBlock(fn.text, fn.interface, config.macros, rel));
      if (!block.checks.empty()) per_file[i].push_back(std::move(block));
    }
  });
  std::vector<CheckBlock> blocks;
  for (auto &v : per_file)
    for (auto &b : v) blocks.push_back(std::move(b));
  return blocks;
}

nlohmann::ordered_json BlockToJson(const CheckBlock &block) {
  nlohmann::ordered_json j;
  j["function"] = block.interface.name;
  j["file"] = block.file;
  j["span"] = {block.interface.start_line, block.interface.end_line};
  nlohmann::ordered_json params = nlohmann::ordered_json::array();
  for (const auto &p : block.interface.parameters)
    params.push_back({{"name", p.name}, {"type", p.declared_type}});
  j["params"] = std::move(params);
  nlohmann::ordered_json checks = nlohmann::ordered_json::array();
  for (const auto &c : block.checks)
    checks.push_back({{"line", c.line}, {"macro", c.macro_name}, {"text", c.raw_text}});
  j["checks"] = std::move(checks);
  j["block_text"] = block.block_text;
  return j;
}

CheckBlock BlockFromJson(const nlohmann::json &j) {
  CheckBlock block;
  block.interface.name = j.at("function").get<std::string>();
  block.file = j.at("file").get<std::string>();
  const auto &span = j.at("span");
  block.interface.start_line = span.at(0).get<int>();
  block.interface.end_line = span.at(1).get<int>();
  for (const auto &p : j.at("params"))
    block.interface.parameters.push_back(
        {p.at("name").get<std::string>(), p.at("type").get<std::string>()});
  for (const auto &c : j.at("checks")) {
    CheckSite site;
    site.file_path = block.file;
    site.line = c.at("line").get<int>();
    site.macro_name = c.at("macro").get<std::string>();
    site.raw_text = c.at("text").get<std::string>();
    site.enclosing_function = block.interface.name;
    block.checks.push_back(std::move(site));
  }
  block.block_text = j.at("block_text").get<std::string>();
  // The header is the first line of the block text, minus the brace.
  std::string first = block.block_text.substr(0, block.block_text.find('\n'));
  if (first.size() >= 2 && first.compare(first.size() - 2, 2, " {") == 0)
    first.resize(first.size() - 2);
  block.interface.header_text = first;
  return block;
}

void WriteBlocksJsonl(const std::filesystem::path &path,
                      const std::vector<CheckBlock> &blocks) {
  std::string out;
  for (const auto &b : blocks) out += BlockToJson(b).dump() + "\n";
  WriteFile(path, out);
}

std::vector<CheckBlock> ReadBlocksJsonl(const std::filesystem::path &path) {
  std::vector<CheckBlock> blocks;
  int line_no = 0;
  for (const auto &line : ReadLines(path)) {
    ++line_no;
    if (Trim(line).empty()) continue;
    try {
      blocks.push_back(BlockFromJson(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception &e) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                        ": malformed block record: " + e.what());
    }
  }
  return blocks;
}

}  // namespace edgefuzz::miner
