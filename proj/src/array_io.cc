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

#include "tagstyle/array_io.h"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <string>

#include "tagstyle/error.h"

namespace tagstyle {

static_assert(std::endian::native == std::endian::little,
              "array files are written in host byte order");

namespace {

ArrayDType ToCode(torch::ScalarType type) {
  switch (type) {
    case torch::kFloat32:
      return ArrayDType::kFloat32;
    case torch::kFloat64:
      return ArrayDType::kFloat64;
    case torch::kInt32:
      return ArrayDType::kInt32;
    case torch::kInt64:
      return ArrayDType::kInt64;
    case torch::kUInt8:
      return ArrayDType::kUInt8;
    default:
      throw InputError("array dtype not supported by the array format");
  }
}

torch::ScalarType FromCode(std::uint8_t code, const std::string& where) {
  switch (static_cast<ArrayDType>(code)) {
    case ArrayDType::kFloat32:
      return torch::kFloat32;
    case ArrayDType::kFloat64:
      return torch::kFloat64;
    case ArrayDType::kInt32:
      return torch::kInt32;
    case ArrayDType::kInt64:
      return torch::kInt64;
    case ArrayDType::kUInt8:
      return torch::kUInt8;
  }
  throw InputError(where + ": unknown dtype code " + std::to_string(code));
}

void PutU32(std::uint8_t* dst, std::uint32_t v) { std::memcpy(dst, &v, 4); }

std::uint32_t GetU32(const std::uint8_t* src) {
  std::uint32_t v;
  std::memcpy(&v, src, 4);
  return v;
}

}  // namespace

void WriteArray(const std::filesystem::path& path, const torch::Tensor& array) {
  if (array.dim() < 1 || array.dim() > 2) {
    throw InputError("array rank must be 1 or 2, got " +
                     std::to_string(array.dim()));
  }
  auto data = array.detach().to(torch::kCPU).contiguous();
  std::array<std::uint8_t, kArrayHeaderBytes> header{};
  std::memcpy(header.data(), kArrayMagic, 4);
  header[4] = static_cast<std::uint8_t>(ToCode(data.scalar_type()));
  header[5] = static_cast<std::uint8_t>(data.dim());
  PutU32(header.data() + 8, static_cast<std::uint32_t>(data.size(0)));
  PutU32(header.data() + 12,
         static_cast<std::uint32_t>(data.dim() == 2 ? data.size(1) : 1));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(header.data()), header.size());
  out.write(static_cast<const char*>(data.data_ptr()),
            static_cast<std::streamsize>(data.nbytes()));
  if (!out) throw InputError("write failed: " + path.string());
}

torch::Tensor ReadArray(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::array<std::uint8_t, kArrayHeaderBytes> header{};
  in.read(reinterpret_cast<char*>(header.data()), header.size());
  if (in.gcount() != static_cast<std::streamsize>(header.size()) ||
      std::memcmp(header.data(), kArrayMagic, 4) != 0) {
    throw InputError(path.string() + ": not an array file");
  }
  const auto dtype = FromCode(header[4], path.string());
  const int rank = header[5];
  if (rank < 1 || rank > 2) {
    throw InputError(path.string() + ": bad rank " + std::to_string(rank));
  }
  const std::int64_t d0 = GetU32(header.data() + 8);
  const std::int64_t d1 = GetU32(header.data() + 12);
  auto out = rank == 1 ? torch::empty({d0}, torch::dtype(dtype))
                       : torch::empty({d0, d1}, torch::dtype(dtype));
  in.read(static_cast<char*>(out.data_ptr()),
          static_cast<std::streamsize>(out.nbytes()));
  if (in.gcount() != static_cast<std::streamsize>(out.nbytes())) {
    throw InputError(path.string() + ": truncated payload");
  }
  return out;
}

}  // namespace tagstyle
