// Copyright (c) the CFID Project Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CFID_HASH_HPP_
#define CFID_HASH_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>

namespace cfid {

// Lowercase hex SHA-256 digest.
std::string Sha256Hex(std::span<const std::uint8_t> bytes);
// Streams the file; throws IoError if it cannot be read.
std::string Sha256HexOfFile(const std::filesystem::path& path);

}  // namespace cfid

#endif  // CFID_HASH_HPP_
