#include <doctest.h>

#include "termkit/text.h"

using namespace termkit;

TEST_CASE("split_whitespace handles runs and edges") {
  CHECK(split_whitespace("") == std::vector<std::string>{});
  CHECK(split_whitespace("   ") == std::vector<std::string>{});
  CHECK(split_whitespace("a b") == std::vector<std::string>{"a", "b"});
  CHECK(split_whitespace("  a \t b\nc  ") == std::vector<std::string>{"a", "b", "c"});
}

TEST_CASE("join_tokens is the inverse of a clean split") {
  std::vector<std::string> tokens{"der", "Transformator", "brummt"};
  CHECK(join_tokens(tokens) == "der Transformator brummt");
  CHECK(split_whitespace(join_tokens(tokens)) == tokens);
  CHECK(join_tokens({}) == "");
}

TEST_CASE("tokenize detaches edge punctuation") {
  CHECK(tokenize("Hello, world!") == std::vector<std::string>{"Hello", ",", "world", "!"});
  CHECK(tokenize("(nested)") == std::vector<std::string>{"(", "nested", ")"});
  CHECK(tokenize("a.b") == std::vector<std::string>{"a.b"});  // interior stays
  CHECK(tokenize("\"quoted\"") == std::vector<std::string>{"\"", "quoted", "\""});
}

TEST_CASE("tokenize keeps pure punctuation chunks") {
  CHECK(tokenize("...") == std::vector<std::string>{".", ".", "."});
  CHECK(tokenize("- -") == std::vector<std::string>{"-", "-"});
}

TEST_CASE("tokenize never splits the reserved markers") {
  auto tokens = tokenize("x __target__ y __done__ .");
  CHECK(tokens == std::vector<std::string>{"x", "__target__", "y", "__done__", "."});
  CHECK(is_reserved_marker(kTargetMarker));
  CHECK(is_reserved_marker(kDoneMarker));
  CHECK_FALSE(is_reserved_marker("__other__"));
}

TEST_CASE("fold_case lowercases ASCII only") {
  CHECK(fold_case("TRANSFORMER") == "transformer");
  CHECK(fold_case("MiXeD123") == "mixed123");
  CHECK(fold_case("\xC3\x84") == "\xC3\x84");  // non-ASCII bytes untouched
}

TEST_CASE("term_matches finds case-insensitive contiguous subsequences") {
  std::vector<std::string> hyp{"The", "power", "transformer", "hums", "."};
  CHECK(term_matches(hyp, "transformer"));
  CHECK(term_matches(hyp, "Transformer"));
  CHECK(term_matches(hyp, "power transformer"));
  CHECK(term_matches(hyp, "THE POWER TRANSFORMER HUMS"));
  CHECK_FALSE(term_matches(hyp, "power hums"));  // not contiguous
  CHECK_FALSE(term_matches(hyp, "transform"));   // no partial-token match
  CHECK(term_matches(hyp, ""));                  // vacuous
}

TEST_CASE("term_matches tokenizes the needle with the baseline tokenizer") {
  std::vector<std::string> hyp{"anti", "-", "freeze", "fluid"};
  CHECK(term_matches(hyp, "anti - freeze"));
  CHECK(term_matches(hyp, "anti- freeze"));  // needle re-tokenized the same way
}
