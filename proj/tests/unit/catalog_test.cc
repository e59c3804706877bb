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

#include "edgefuzz/catalog.h"

#include "gtest/gtest.h"
#include "test_paths.h"

namespace edgefuzz::catalog {
namespace {

using ::edgefuzz::testing::FixturesDir;

std::vector<ApiSignature> Parse(const char *text) {
  return ParseCatalog(nlohmann::json::parse(text), TypeVocabulary::Default(), "test");
}

std::string ErrorOf(const char *text) {
  try {
    Parse(text);
  } catch (const ConfigError &e) {
    return e.what();
  }
  return "";
}

TEST(EtypePattern, KeyIsSortedWithCounts) {
  EtypePattern p;
  p.Add(BaseType("Tensor"));
  p.Add(BaseType("Int"));
  p.Add(BaseType("Tensor"));
  EXPECT_EQ(p.Key(), "Int:1|Tensor:2");
  EXPECT_EQ(p.size(), 3);
  EXPECT_EQ(EtypePattern::FromKey("Int:1|Tensor:2"), p);
  EXPECT_EQ(EtypePattern().Key(), "");
  EXPECT_TRUE(EtypePattern::FromKey("").empty());
}

TEST(EtypePattern, FromKeyRejectsNonCanonical) {
  EXPECT_THROW(EtypePattern::FromKey("Tensor:1|Int:1"), ConfigError);
  EXPECT_THROW(EtypePattern::FromKey("Tensor:0"), ConfigError);
  EXPECT_THROW(EtypePattern::FromKey("Tensor"), ConfigError);
  EXPECT_THROW(EtypePattern::FromKey("Widget:1"), ConfigError);
  EXPECT_THROW(EtypePattern::FromKey("Tensor:2x"), ConfigError);
}

TEST(EtypePattern, MultisetInclusion) {
  const auto t1 = EtypePattern::FromKey("Tensor:1");
  const auto t2 = EtypePattern::FromKey("Tensor:2");
  EXPECT_TRUE(t1.IsSubsetOf(t2));
  EXPECT_FALSE(t2.IsSubsetOf(t1));
  EXPECT_TRUE(EtypePattern().IsSubsetOf(t1));
  EXPECT_FALSE(EtypePattern::FromKey("Int:1").IsSubsetOf(t2));
}

TEST(LoadCatalog, AddHasTwoTensorPattern) {
  auto apis = Parse(R"([{"name": "torch.add", "params": [
      {"name": "input", "type": "Tensor"}, {"name": "other", "type": "Tensor"},
      {"name": "alpha", "type": "Scalar", "optional": true}],
      "doc_hint": "elementwise sum"}])");
  ASSERT_EQ(apis.size(), 1u);
  EXPECT_EQ(apis[0].params[2].position, 3);
  EXPECT_TRUE(apis[0].params[2].optional);
  EXPECT_EQ(apis[0].ShortName(), "add");
  EXPECT_EQ(apis[0].doc_hint, "elementwise sum");
  EXPECT_EQ(EtypeOf(apis[0]).Key(), "Scalar:1|Tensor:2");
  EXPECT_EQ(EtypeOf(apis[0]).size(), 3);
}

TEST(LoadCatalog, ZeroParameterApi) {
  auto apis = Parse(R"([{"name": "mt.seed", "params": []}, {"name": "mt.now"}])");
  EXPECT_TRUE(EtypeOf(apis[0]).empty());
  EXPECT_TRUE(EtypeOf(apis[1]).empty());
}

TEST(LoadCatalog, ErrorsNameTheRecord) {
  EXPECT_NE(ErrorOf(R"([{"name": "a.f"}, {"name": "a.f"}])").find("record 1 (a.f)"),
            std::string::npos);
  EXPECT_NE(ErrorOf(R"([{"name": "a.g", "params": [{"name": "x", "type": "Matrix"}]}])")
                .find("unknown type 'Matrix'"),
            std::string::npos);
  EXPECT_NE(ErrorOf(R"([{"name": "a.h", "params": [{"name": "x", "type": "Int"},
                                                    {"name": "x", "type": "Int"}]}])")
                .find("duplicate parameter"),
            std::string::npos);
  EXPECT_NE(ErrorOf(R"([{"name": "a..b"}])").find("dotted identifier"), std::string::npos);
  EXPECT_NE(ErrorOf(R"([{"name": "a.b", "params": [{"name": "1x", "type": "Int"}]}])")
                .find("bad parameter name"),
            std::string::npos);
  EXPECT_NE(ErrorOf(R"({"name": "a.b"})").find("array"), std::string::npos);
  EXPECT_NE(ErrorOf(R"([{"name": "a.b", "params": [{"name": "x", "type": "Int",
                                                    "optional": "yes"}]}])")
                .find("optional"),
            std::string::npos);
}

TEST(LoadCatalog, ConfiguredVocabulary) {
  TypeVocabulary vocab({"Tensor", "Device"});
  auto apis = ParseCatalog(nlohmann::json::parse(
                               R"([{"name": "m.to", "params": [{"name": "d", "type": "Device"}]}])"),
                           vocab);
  EXPECT_EQ(EtypeOf(apis[0]).Key(), "Device:1");
}

// The committed test target catalog and its hand-computed pattern table.
TEST(LoadCatalog, MiniTargetPatternsMatchHandTable) {
  const auto apis = LoadCatalog(FixturesDir() / "minitarget" / "catalog.json");
  const auto table = nlohmann::json::parse(
      ReadFile(FixturesDir() / "minitarget" / "catalog_patterns.json"));
  ASSERT_EQ(apis.size(), table.size());
  for (const auto &api : apis) {
    ASSERT_TRUE(table.contains(api.name)) << api.name;
    EXPECT_EQ(EtypeOf(api).Key(), table[api.name].get<std::string>()) << api.name;
    EXPECT_EQ(EtypeOf(api).size(), static_cast<int>(api.params.size()));
  }
}

TEST(LoadCatalog, MissingFileIsIoError) {
  EXPECT_THROW(LoadCatalog(FixturesDir() / "nope.json"), IoError);
}

}  // namespace
}  // namespace edgefuzz::catalog
