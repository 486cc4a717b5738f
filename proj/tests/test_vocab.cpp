#include <gtest/gtest.h>

#include <string>

#include "neuron_dissect/vocab.hpp"
#include "test_util.hpp"

namespace nd = neuron_dissect;

namespace {

template <typename Fn>
nd::Error capture(Fn&& fn) {
  try {
    fn();
  } catch (const nd::Error& e) {
    return e;
  }
  ADD_FAILURE() << "expected neuron_dissect::Error";
  return nd::Error(nd::ErrorKind::kIo, "none");
}

}  // namespace

TEST(Concepts, OneWordPerLine) {
  const auto list = nd::parse_concepts("green\nblue\n");
  ASSERT_EQ(list.size(), 2u);
  EXPECT_EQ(list[0], "green");
  EXPECT_EQ(list[1], "blue");
  EXPECT_EQ(list.index_of("blue"), 1u);
  EXPECT_FALSE(list.index_of("red").has_value());
}

TEST(Concepts, DuplicateWord) {
  const auto e = capture([] { nd::parse_concepts("green\ngreen\n"); });
  EXPECT_EQ(e.kind(), nd::ErrorKind::kDuplicateWord);
  EXPECT_EQ(e.line.value_or(0), 2u);
}

TEST(Concepts, EmptyLine) {
  const auto e = capture([] { nd::parse_concepts("green\n  \nblue\n"); });
  EXPECT_EQ(e.kind(), nd::ErrorKind::kEmptyLine);
  EXPECT_EQ(e.line.value_or(0), 2u);
}

TEST(Concepts, TwentyThousandWords) {
  std::string text;
  for (int i = 0; i < 20000; ++i) text += "w" + std::to_string(i) + "\n";
  EXPECT_EQ(nd::parse_concepts(text).size(), 20000u);
}

TEST(Concepts, TrimsCaseFoldsAndComposes) {
  const auto list = nd::parse_concepts("  Green \r\nCAF\xC3\x89\n");
  EXPECT_EQ(list[0], "green");
  EXPECT_EQ(list[1], "caf\xC3\xA9");
  // "cafe" + combining acute is the same word after NFC.
  EXPECT_EQ(list.index_of("cafe\xCC\x81"), 1u);
  const auto e = capture([] { nd::parse_concepts("caf\xC3\xA9\ncafe\xCC\x81\n"); });
  EXPECT_EQ(e.kind(), nd::ErrorKind::kDuplicateWord);
}

TEST(CategoryMap, ShippedMappingMatchesPublishedCounts) {
  const auto map = nd::read_category_map(std::string(ND_DATA_DIR) + "/categories.csv");
  EXPECT_EQ(map.size(), 1450u);
  const auto counts = map.counts();
  using C = nd::Category;
  EXPECT_EQ(counts[nd::index_of(C::kColors)], 45u);
  EXPECT_EQ(counts[nd::index_of(C::kTexturesAndMaterials)], 74u);
  EXPECT_EQ(counts[nd::index_of(C::kObjectsAndMachines)], 449u);
  EXPECT_EQ(counts[nd::index_of(C::kPlacesAndBuildings)], 270u);
  EXPECT_EQ(counts[nd::index_of(C::kNaturalElementsAndOrganisms)], 254u);
  EXPECT_EQ(counts[nd::index_of(C::kActivities)], 154u);
  EXPECT_EQ(counts[nd::index_of(C::kAbstract)], 127u);
  EXPECT_EQ(counts[nd::index_of(C::kNames)], 43u);
  EXPECT_EQ(counts[nd::index_of(C::kUnknown)], 34u);
  EXPECT_EQ(counts[nd::index_of(C::kUnmapped)], 0u);
  EXPECT_EQ(map.lookup("green"), C::kColors);
  EXPECT_EQ(map.lookup("Violin"), C::kObjectsAndMachines);
  EXPECT_EQ(map.lookup("scotland"), C::kPlacesAndBuildings);
}

TEST(CategoryMap, EmptyFileIsEmptyMap) {
  const auto map = nd::parse_category_map("");
  EXPECT_EQ(map.size(), 0u);
  EXPECT_EQ(map.lookup("green"), nd::Category::kUnmapped);
}

TEST(CategoryMap, UnknownCategoryNamesLine) {
  const auto e = capture([] {
    nd::parse_category_map("word,category\ngreen,Colors\nblob,Shapes\n");
  });
  EXPECT_EQ(e.kind(), nd::ErrorKind::kUnknownCategory);
  EXPECT_EQ(e.line.value_or(0), 3u);
}

TEST(CategoryMap, DuplicateWord) {
  const auto e = capture([] {
    nd::parse_category_map("word,category\ngreen,Colors\nGreen,Names\n");
  });
  EXPECT_EQ(e.kind(), nd::ErrorKind::kDuplicateWord);
}

TEST(CategoryMap, QuotedFieldsAndCaseInsensitiveNames) {
  const auto map = nd::parse_category_map(
      "word,category\r\n\"rock, paper\",\"objects AND machines\"\r\nfoo,unmapped\r\n");
  EXPECT_EQ(map.lookup("rock, paper"), nd::Category::kObjectsAndMachines);
  EXPECT_EQ(map.lookup("foo"), nd::Category::kUnmapped);
}

TEST(CategoryMap, RequiresHeader) {
  EXPECT_EQ(capture([] { nd::parse_category_map("green,Colors\n"); }).kind(),
            nd::ErrorKind::kCsvParse);
}

TEST(Manifest, IdsAndOptionalScores) {
  const auto m = nd::parse_manifest("id,complexity\na,0.5\nb,\n");
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m.complexity("a"), 0.5);
  EXPECT_FALSE(m.complexity("b").has_value());
  EXPECT_TRUE(m.has_any_complexity());
  EXPECT_FALSE(nd::parse_manifest("id\nx\ny\n").has_any_complexity());
}

TEST(Manifest, RejectsOutOfRangeScoresAndDuplicates) {
  EXPECT_EQ(capture([] { nd::parse_manifest("id,complexity\na,1.5\n"); }).kind(),
            nd::ErrorKind::kInvalidParameter);
  EXPECT_EQ(capture([] { nd::parse_manifest("id\na\na\n"); }).kind(),
            nd::ErrorKind::kDuplicateWord);
}

TEST(Manifest, FormatParsesBack) {
  const nd::ImageManifest m({"x", "y,z"}, {0.25, std::nullopt});
  const auto back = nd::parse_manifest(nd::format_manifest(m));
  EXPECT_EQ(back.ids(), m.ids());
  EXPECT_EQ(back.complexity("x"), 0.25);
  EXPECT_FALSE(back.complexity("y,z").has_value());
}
