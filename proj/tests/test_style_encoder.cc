// Copyright (c) 2026 The tagstyle Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "testing.h"

#include <map>
#include <random>

#include "tagstyle/error.h"
#include "tagstyle/style_encoder.h"

using namespace tagstyle;

namespace {

double Cos(const torch::Tensor& a, const torch::Tensor& b) {
  return (torch::dot(a, b) / (a.norm() * b.norm())).item<double>();
}

ReferenceEncoder SmallReference() {
  ReferenceEncoderOptions o;
  o.n_mels = 12;
  o.channels = 8;
  o.heads = 2;
  o.d_style = 6;
  torch::manual_seed(5);
  ReferenceEncoder enc(o);
  enc->to(torch::kFloat64);
  enc->eval();
  return enc;
}

}  // namespace

TEST_CASE("stub embedder: deterministic, unit norm, rejects empty text") {
  StubEmbedder e(256, 0);
  auto a = e.Embed("very angry");
  CHECK(torch::equal(a, e.Embed("very angry")));
  CHECK(torch::equal(a, StubEmbedder(256, 0).Embed("very angry")));
  CHECK(a.size(0) == 256);
  CHECK(std::abs(a.norm().item<double>() - 1.0) < 1e-6);
  CHECK(std::abs(e.Embed("calm").norm().item<double>() - 1.0) < 1e-6);
  CHECK_THROWS_AS(e.Embed(""), InputError);
  CHECK_THROWS_AS(e.Embed("   "), InputError);
}

TEST_CASE("stub embedder: shared tokens pull embeddings together") {
  int wins = 0;
  const int seeds = 300;
  for (int s = 0; s < seeds; ++s) {
    StubEmbedder e(256, static_cast<std::uint64_t>(s));
    const auto va = e.Embed("very angry");
    wins += Cos(va, e.Embed("angry")) > Cos(va, e.Embed("calm"));
  }
  CHECK(static_cast<double>(wins) / seeds >= 0.99);
}

TEST_CASE("tag encoding: single, duplicate, pair and order") {
  StubEmbedder e(32, 1);
  torch::manual_seed(2);
  AdaptationLayer adapt(32, 16, 8);
  adapt->to(torch::kFloat64);
  auto single = TagEncode({"happy"}, e, adapt);
  CHECK(torch::allclose(single, adapt->forward(e.Embed("happy")), 0, 1e-12));
  CHECK((torch::equal(TagEncode({"happy", "happy"}, e, adapt), single)));

  // Mean computed by hand from the two embeddings.
  auto a = e.Embed("happy"), b = e.Embed("very sad");
  auto by_hand = adapt->forward((a + b) / 2.0);
  auto pair = TagEncode({"happy", "very sad"}, e, adapt);
  CHECK((pair - by_hand).abs().max().item<double>() < 1e-6);
  CHECK((torch::allclose(TagEncode({"very sad", "happy"}, e, adapt), pair, 0, 1e-12)));

  auto mean = MeanTagEmbedding({"happy", "very sad", "calm"}, e);
  auto expect = (a + b + e.Embed("calm")) / 3.0;
  CHECK((mean - expect).abs().max().item<double>() < 1e-6);
  CHECK_THROWS_AS(TagEncode({}, e, adapt), InputError);
}

TEST_CASE("sample_tags: full set when singleton, uniform marginals, deterministic") {
  std::mt19937_64 one(1);
  for (int i = 0; i < 50; ++i) {
    CHECK(SampleTags({"only"}, one) == std::vector<std::string>{"only"});
  }
  // Size k uniform on {1,2,3} and a uniform k-subset give every tag the
  // marginal (1/3)(1/3 + 2/3 + 1) = 2/3.
  const std::vector<std::string> tags{"a", "b", "c"};
  std::mt19937_64 rng(99);
  std::map<std::string, int> count;
  std::map<std::size_t, int> sizes;
  const int draws = 30000;
  for (int i = 0; i < draws; ++i) {
    auto s = SampleTags(tags, rng);
    ++sizes[s.size()];
    for (const auto& t : s) ++count[t];
  }
  for (const auto& t : tags) {
    CHECK(std::abs(count[t] / static_cast<double>(draws) - 2.0 / 3.0) < 0.02);
  }
  for (std::size_t k = 1; k <= 3; ++k) {
    CHECK(std::abs(sizes[k] / static_cast<double>(draws) - 1.0 / 3.0) < 0.02);
  }
  std::mt19937_64 r1(5), r2(5);
  for (int i = 0; i < 100; ++i) CHECK(SampleTags(tags, r1) == SampleTags(tags, r2));
  std::mt19937_64 r3(5);
  CHECK_THROWS_AS(SampleTags({}, r3), InputError);
}

TEST_CASE("reference encoder ignores padding") {
  auto enc = SmallReference();
  torch::manual_seed(8);
  const std::int64_t t = 9;
  auto mel = torch::randn({1, t, 12}, torch::kFloat64);
  auto base = enc->forward(mel, torch::tensor({t}));
  auto padded = torch::cat({mel, torch::randn({1, t, 12}, torch::kFloat64) * 50}, 1);
  auto out = enc->forward(padded, torch::tensor({t}));
  CHECK((out - base).abs().max().item<double>() < 1e-6);

  // Batched with a longer neighbour.
  auto other = torch::randn({1, 2 * t, 12}, torch::kFloat64);
  auto batch = torch::cat({padded, other}, 0);
  auto both = enc->forward(batch, torch::tensor({t, 2 * t}));
  CHECK((both[0] - base[0]).abs().max().item<double>() < 1e-6);
  CHECK(torch::isfinite(both).all().item<bool>());
  CHECK(both.size(1) == 6);
}

TEST_CASE("reference encoder: constant mels pool to the same vector at any length") {
  auto enc = SmallReference();
  torch::manual_seed(9);
  auto frame = torch::randn({1, 1, 12}, torch::kFloat64);
  auto a = enc->forward(frame.expand({1, 5, 12}).contiguous(), torch::tensor({5}));
  auto b = enc->forward(frame.expand({1, 10, 12}).contiguous(), torch::tensor({10}));
  CHECK((a - b).abs().max().item<double>() < 1e-6);
}

TEST_CASE("reference encoder rejects empty input") {
  auto enc = SmallReference();
  auto mel = torch::zeros({1, 4, 12}, torch::kFloat64);
  CHECK_THROWS_AS(enc->forward(mel, torch::tensor({0})), InputError);
  CHECK_THROWS_AS(enc->forward(torch::zeros({4, 12}, torch::kFloat64), torch::tensor({4})),
                  InputError);
}
