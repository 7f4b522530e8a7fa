/*
 * Copyright 2026 The topicmap Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Binary model and bundle files.
//
// Container (all integers little-endian):
//
//   offset  size  field
//   0       8     magic "TOPICMAP"
//   8       4     format_version (u32, currently 1)
//   12      4     kind (u32, 1 = hierarchical model, 2 = service bundle)
//   16      8     payload size in bytes (u64)
//   24      8     FNV-1a 64 checksum of the payload (u64)
//   32      ...   payload
//
// Payload primitives: u8, u32, u64, f64 (IEEE-754 bit pattern, so every real
// round-trips exactly) and strings as u64 length + UTF-8 bytes.
//
// Topic level: u64 W, u64 T, T role bytes (0 subject, 1 background),
//   u64 vocabulary hash, W strings, W*T f64 phi (column-major), u64 D,
//   D doc-id strings, T*D f64 theta (column-major), T f64 n_t.
// Hierarchical model: config, level 1, level 2, T2*T1 f64 psi (column-major).
// Config: per level u64 n_subject, u64 n_background, u64 seed; f64
//   pseudo_doc_weight; per level f64 smooth_beta, smooth_alpha, sparse_beta,
//   u8 has_decorr, f64 decorr_gamma; u64 max_passes, f64 rel_tol.
// Bundle: model payload, u64 model hash, u64 profile count, per profile
//   strings id, source, snippet, T1 f64, T2 f64; provenance string.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "json.hpp"
#include "topicmap/explorer.hpp"
#include "topicmap/hierarchy.hpp"

namespace topicmap {

inline constexpr std::uint32_t kFormatVersion = 1;

std::uint64_t fnv1a64(std::string_view bytes);

std::string serialize_model(const HierarchicalModel& model);
// Throws kCorruptBundle / kVersionMismatch.
HierarchicalModel deserialize_model(std::string_view bytes);

// FNV-1a of the serialized model.
std::uint64_t model_hash(const HierarchicalModel& model);

void save_hierarchical_model(const HierarchicalModel& model,
                             const std::filesystem::path& path);
HierarchicalModel load_hierarchical_model(const std::filesystem::path& path);

struct Bundle {
  HierarchicalModel model;
  SearchIndex index;
  std::string provenance;  // JSON text
};

std::string serialize_bundle(const Bundle& bundle);
Bundle deserialize_bundle(std::string_view bytes);

void save_bundle(const Bundle& bundle, const std::filesystem::path& path);
Bundle load_bundle(const std::filesystem::path& path);

// Writes to a temporary sibling and renames it over `path`.
void write_file_atomically(const std::filesystem::path& path,
                           std::string_view contents);
std::string read_file(const std::filesystem::path& path);

nlohmann::json to_json(const HierarchyConfig& config);

}  // namespace topicmap
