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

#ifndef TAGSTYLE_RNG_H_
#define TAGSTYLE_RNG_H_

#include <cstdint>
#include <initializer_list>
#include <string_view>

namespace tagstyle {

inline std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Counter-based seed derivation: every random stream in the system is keyed
// by (base seed, purpose, counters...) so that state at step k never depends
// on how many draws earlier steps made.
inline std::uint64_t MixSeed(std::uint64_t seed,
                             std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = SplitMix64(seed);
  for (auto k : keys) h = SplitMix64(h ^ SplitMix64(k + 0x632be59bd9b4e019ULL));
  return h;
}

template <typename... Keys>
std::uint64_t MixSeed(std::uint64_t seed, Keys... keys) {
  return MixSeed(seed, {static_cast<std::uint64_t>(keys)...});
}

// 64-bit FNV-1a.
inline std::uint64_t Fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace tagstyle

#endif  // TAGSTYLE_RNG_H_
