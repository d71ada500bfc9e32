// Copyright 2026 The petcond Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <fstream>

#include "petcond/embedder.hpp"
#include "petcond/errors.hpp"
#include "petcond/ptf.hpp"
#include "support.hpp"

using namespace petcond;

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Writes a two-prompt export in the layout produced by the offline CLIP export tool.
std::filesystem::path fake_clip_export() {
  const auto dir = testing::scratch_dir("clip_export");
  const std::vector<std::string> prompts{prompt_for(CountLevel::parse("1/100")),
                                         prompt_for(CountLevel::full())};
  nlohmann::json manifest{{"model", "test/clip"}, {"dim", 4}, {"prompts", nlohmann::json::array()}};
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    const std::string file = "p" + std::to_string(i) + ".ptf";
    std::vector<double> v{1.0 + static_cast<double>(i), 2.0, -2.0, 0.5};
    ptf::write(dir / file, Tensor<double>({4}, v));
    manifest["prompts"].push_back({{"prompt", prompts[i]}, {"file", file}});
  }
  std::ofstream(dir / "clip_manifest.json") << manifest.dump();
  return dir;
}

}  // namespace

TEST_CASE("prompts render the level label into the template", "[embedder]") {
  CHECK(prompt_for(CountLevel::parse("1/100")) == "a 1/100 count level PET image");
  CHECK(prompt_for(CountLevel::full()) == "a full count level PET image");
  CHECK(prompt_for(CountLevel::parse("1/4")) == prompt_for(CountLevel::parse("1/4")));
  CHECK(prompt_for(CountLevel::parse("1/2"), {"dose {level}"}) == "dose 1/2");
  CHECK_THROWS_AS(PromptTemplate{"no placeholder"}.validate(), ConfigError);
  CHECK_THROWS_AS(PromptTemplate{"{level} {level}"}.validate(), ConfigError);
}

TEST_CASE("fallback embeddings are deterministic unit vectors", "[embedder]") {
  const FallbackEmbedder backend(0);
  const auto a = backend.embed("a 1/100 count level PET image");
  const auto b = backend.embed("a 1/100 count level PET image");
  CHECK(a == b);
  CHECK(a.vector.size() == 512);
  CHECK(std::abs(std::sqrt(dot(a.vector, a.vector)) - 1.0) < 1e-6);
  CHECK(a.source == "deterministic-fallback");
  CHECK(FallbackEmbedder(1).embed(a.prompt).vector != a.vector);
}

TEST_CASE("registry prompts are nearly orthogonal under the fallback", "[embedder]") {
  const FallbackEmbedder backend(0);
  std::vector<std::vector<double>> vs;
  for (const auto& level : registry()) vs.push_back(backend.embed(prompt_for(level)).vector);
  int pairs = 0;
  for (std::size_t i = 0; i < vs.size(); ++i)
    for (std::size_t j = i + 1; j < vs.size(); ++j, ++pairs)
      CHECK(std::abs(dot(vs[i], vs[j])) < 0.3);
  CHECK(pairs == 15);
}

TEST_CASE("embedding tables cover each level once and round-trip", "[embedder]") {
  const FallbackEmbedder backend(4, 32);
  const auto levels = registry();
  const auto table = embedding_table(backend, levels);
  CHECK(table.entries.size() == 6);
  CHECK(table.dim == 32);
  CHECK(table == embedding_table(backend, levels));
  CHECK(table.at(CountLevel::full()).prompt == "a full count level PET image");
  CHECK_THROWS_AS(table.at(CountLevel::parse("1/3")), LookupError);

  const auto dir = testing::scratch_dir("emb_table");
  save_table(table, dir);
  CHECK(load_table(dir) == table);

  const std::vector<CountLevel> dup{CountLevel::full(), CountLevel::parse("2/2")};
  CHECK_THROWS_AS(embedding_table(backend, dup), ConfigError);
  CHECK_THROWS_AS(embedding_table(backend, std::vector<CountLevel>{}), ConfigError);
}

TEST_CASE("pretrained backend loads an offline export and never falls back", "[embedder]") {
  const auto dir = fake_clip_export();
  const ClipTextEmbedder clip(dir);
  CHECK(clip.dim() == 4);
  const auto e = clip.embed(prompt_for(CountLevel::full()));
  CHECK(std::abs(dot(e.vector, e.vector) - 1.0) < 1e-12);
  CHECK(e.vector[0] == Catch::Approx(2.0 / std::sqrt(4.0 + 4.0 + 4.0 + 0.25)));
  CHECK_THROWS_AS(clip.embed(prompt_for(CountLevel::parse("1/4"))), LookupError);

  const auto rebuilt = make_embedder(clip.descriptor());
  CHECK(rebuilt->kind() == "pretrained-clip-text");
  CHECK(rebuilt->embed(e.prompt) == e);

  CHECK_THROWS_AS(ClipTextEmbedder(dir / "missing"), IoError);
  ::unsetenv(kClipWeightsEnv);
  CHECK_THROWS_AS(make_embedder({{"kind", "clip"}}), IoError);
  ::setenv(kClipWeightsEnv, dir.c_str(), 1);
  CHECK(make_embedder({{"kind", "clip"}})->dim() == 4);
  ::unsetenv(kClipWeightsEnv);
  CHECK_THROWS_AS(make_embedder({{"kind", "bag-of-words"}}), ConfigError);
}
