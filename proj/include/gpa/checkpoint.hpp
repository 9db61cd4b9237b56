// Copyright 2026 The gpa Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>

#include "gpa/model.hpp"
#include "gpa/token_space.hpp"
#include "json.hpp"

namespace gpa {

// File layout: 8-byte magic "GPACKPT1", u64 header length, JSON header
// {layout, model, dtype, step, meta}, then the raw little-endian parameter
// vector in the header's dtype.
struct Checkpoint {
  VocabLayout layout;
  model::Transformer<float> model;
  int step = 0;
  nlohmann::json meta = nlohmann::json::object();
};

template <class T>
void save_checkpoint(const std::filesystem::path& path, const VocabLayout& layout,
                     const model::Transformer<T>& model, int step,
                     const nlohmann::json& meta = nlohmann::json::object());

// Loads into single precision regardless of the stored dtype.
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Header only, without reading the payload.
nlohmann::json read_checkpoint_header(const std::filesystem::path& path);

}  // namespace gpa
