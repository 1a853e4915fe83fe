#include <gtest/gtest.h>

#include "catprobe/errors.hpp"
#include "catprobe/source.hpp"

namespace catprobe {
namespace {

TEST(SourceUnit, HashIsSha256OfCode) {
  // FIPS 180-2 test vector.
  EXPECT_EQ(to_hex(sha256("abc")), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  const auto unit = make_source_unit("a.py", Language::python, "abc");
  EXPECT_EQ(unit.hash_hex(), to_hex(sha256("abc")));
}

TEST(SourceUnit, RejectsInvalidUtf8) {
  EXPECT_THROW(make_source_unit("bad", Language::go, std::string("x = \xff", 5)), FormatError);
  EXPECT_TRUE(is_valid_utf8("caf\xc3\xa9"));
  EXPECT_FALSE(is_valid_utf8("\xc0\xaf"));          // overlong '/'
  EXPECT_FALSE(is_valid_utf8("\xed\xa0\x80"));      // surrogate
  EXPECT_FALSE(is_valid_utf8("\xe2\x82"));          // truncated
  EXPECT_TRUE(is_valid_utf8("\xf0\x9f\x98\x80"));
}

TEST(Language, NamesAndExtensions) {
  EXPECT_EQ(parse_language("javascript"), Language::javascript);
  EXPECT_EQ(to_string(Language::go), "go");
  EXPECT_THROW(parse_language("rust"), UnsupportedLanguage);
  EXPECT_EQ(language_from_extension(".java"), Language::java);
  EXPECT_EQ(language_from_extension(".rs"), std::nullopt);
}

}  // namespace
}  // namespace catprobe
