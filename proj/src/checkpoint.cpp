// Copyright 2026 The gpa Authors
// SPDX-License-Identifier: Apache-2.0

#include "gpa/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "gpa/error.hpp"

namespace gpa {

namespace {

constexpr char kMagic[8] = {'G', 'P', 'A', 'C', 'K', 'P', 'T', '1'};

template <class T>
constexpr const char* dtype_name() {
  return sizeof(T) == 4 ? "f32" : "f64";
}

nlohmann::json read_header(std::ifstream& in, const std::filesystem::path& path) {
  char magic[8];
  std::uint64_t len = 0;
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
    throw Error(Errc::Parse, path.string() + ": not a checkpoint");
  if (!in.read(reinterpret_cast<char*>(&len), 8) || len > (1u << 26))
    throw Error(Errc::Parse, path.string() + ": bad header length");
  std::string header(len, '\0');
  if (!in.read(header.data(), static_cast<std::streamsize>(len)))
    throw Error(Errc::Parse, path.string() + ": truncated header");
  try {
    return nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::Parse, path.string() + ": " + e.what());
  }
}

template <class S>
void read_payload(std::ifstream& in, std::vector<float>& dst, const std::filesystem::path& path) {
  std::vector<S> buf(dst.size());
  if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(S))))
    throw Error(Errc::Parse, path.string() + ": truncated payload");
  for (std::size_t i = 0; i < buf.size(); ++i) dst[i] = static_cast<float>(buf[i]);
}

}  // namespace

template <class T>
void save_checkpoint(const std::filesystem::path& path, const VocabLayout& layout,
                     const model::Transformer<T>& model, int step, const nlohmann::json& meta) {
  if (model.config().vocab_size != layout.total())
    throw Error(Errc::LayoutMismatch, "model vocab " + std::to_string(model.config().vocab_size) +
                                          " != layout " + std::to_string(layout.total()));
  nlohmann::json header{{"layout", layout.to_json()},
                        {"fingerprint", layout.fingerprint()},
                        {"model", model.config().to_json()},
                        {"dtype", dtype_name<T>()},
                        {"num_params", model.num_params()},
                        {"step", step},
                        {"meta", meta}};
  const std::string h = header.dump();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  const std::uint64_t len = h.size();
  out.write(kMagic, 8);
  out.write(reinterpret_cast<const char*>(&len), 8);
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  out.write(reinterpret_cast<const char*>(model.params().data()),
            static_cast<std::streamsize>(model.params().size() * sizeof(T)));
  if (!out) throw Error(Errc::Io, "write failed: " + path.string());
}

nlohmann::json read_checkpoint_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  return read_header(in, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  const nlohmann::json header = read_header(in, path);
  VocabLayout layout = VocabLayout::from_json(header.at("layout"));
  const auto cfg = model::ModelConfig::from_json(header.at("model"));
  if (cfg.vocab_size != layout.total())
    throw Error(Errc::LayoutMismatch, path.string() + ": model vocab does not match layout");
  Checkpoint ck{std::move(layout), model::Transformer<float>(cfg), header.value("step", 0),
                header.value("meta", nlohmann::json::object())};
  if (header.value("num_params", ck.model.num_params()) != ck.model.num_params())
    throw Error(Errc::Parse, path.string() + ": parameter count mismatch");
  const std::string dtype = header.value("dtype", "f32");
  if (dtype == "f32")
    read_payload<float>(in, ck.model.params(), path);
  else if (dtype == "f64")
    read_payload<double>(in, ck.model.params(), path);
  else
    throw Error(Errc::Parse, path.string() + ": unknown dtype " + dtype);
  return ck;
}

template void save_checkpoint<float>(const std::filesystem::path&, const VocabLayout&,
                                     const model::Transformer<float>&, int, const nlohmann::json&);
template void save_checkpoint<double>(const std::filesystem::path&, const VocabLayout&,
                                      const model::Transformer<double>&, int, const nlohmann::json&);

}  // namespace gpa
