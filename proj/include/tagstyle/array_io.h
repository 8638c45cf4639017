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

#ifndef TAGSTYLE_ARRAY_IO_H_
#define TAGSTYLE_ARRAY_IO_H_

#include <cstdint>
#include <filesystem>

#include <torch/torch.h>

namespace tagstyle {

// Binary array file layout (little-endian):
//
//   offset  size  field
//   0       4     magic "TSAR"
//   4       1     dtype code (see ArrayDType)
//   5       1     rank (1 or 2)
//   6       2     reserved, zero
//   8       4     dim0
//   12      4     dim1 (1 for rank-1 arrays)
//   16      ...   row-major payload
enum class ArrayDType : std::uint8_t {
  kFloat32 = 1,
  kFloat64 = 2,
  kInt32 = 3,
  kInt64 = 4,
  kUInt8 = 5,
};

inline constexpr char kArrayMagic[4] = {'T', 'S', 'A', 'R'};
inline constexpr std::size_t kArrayHeaderBytes = 16;

// Writes a rank-1 or rank-2 CPU tensor. Throws InputError on unsupported
// dtype/rank and on I/O failure.
void WriteArray(const std::filesystem::path& path, const torch::Tensor& array);

// Reads an array written by WriteArray, restoring dtype and shape exactly.
torch::Tensor ReadArray(const std::filesystem::path& path);

}  // namespace tagstyle

#endif  // TAGSTYLE_ARRAY_IO_H_
