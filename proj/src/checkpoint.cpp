//
// Project ringkit - Copyright 2026 ringkit authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "ringkit/checkpoint.h"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#include "ringkit/error.h"

namespace ringkit::tensor {
namespace {

  template <class T>
  constexpr const char *precision_name() {
    return sizeof(T) == 4 ? "f32" : "f64";
  }

  void swap_bytes_if_big_endian(char *data, std::size_t n, std::size_t width) {
    if constexpr (std::endian::native == std::endian::big) {
      for (std::size_t i = 0; i < n; ++i)
        std::reverse(data + i * width, data + (i + 1) * width);
    }
  }

  template <class S, class T>
  void read_values(std::ifstream &in, Tensor<T> &out) {
    std::vector<S> raw(out.size());
    in.read(reinterpret_cast<char *>(raw.data()),
            static_cast<std::streamsize>(raw.size() * sizeof(S)));
    if (!in)
      throw Error(ErrorCode::kIo, "params.bin is shorter than the manifest");
    swap_bytes_if_big_endian(reinterpret_cast<char *>(raw.data()), raw.size(),
                             sizeof(S));
    std::copy(raw.begin(), raw.end(), out.data());
  }

}  // namespace

template <class T>
void save_checkpoint(const std::filesystem::path &dir,
                     const Checkpoint<T> &ckpt) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec)
    throw Error(ErrorCode::kIo, "cannot create " + dir.string());

  nlohmann::ordered_json manifest;
  manifest["format"] = "ringkit-checkpoint";
  manifest["version"] = 1;
  manifest["precision"] = precision_name<T>();
  nlohmann::ordered_json params = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < ckpt.params.size(); ++i)
    params.push_back({ { "name", ckpt.names.at(i) },
                       { "shape", ckpt.params[i].shape() } });
  manifest["params"] = std::move(params);
  manifest["metadata"] = ckpt.metadata;

  std::ofstream mf(dir / "manifest.json", std::ios::trunc);
  mf << manifest.dump(2) << '\n';
  std::ofstream bin(dir / "params.bin", std::ios::binary | std::ios::trunc);
  for (const Tensor<T> &p: ckpt.params) {
    std::vector<T> copy = p.storage();
    swap_bytes_if_big_endian(reinterpret_cast<char *>(copy.data()),
                             copy.size(), sizeof(T));
    bin.write(reinterpret_cast<const char *>(copy.data()),
              static_cast<std::streamsize>(copy.size() * sizeof(T)));
  }
  if (!mf || !bin)
    throw Error(ErrorCode::kIo, "failed writing checkpoint to " + dir.string());
}

template <class T>
Checkpoint<T> load_checkpoint(const std::filesystem::path &dir) {
  std::ifstream mf(dir / "manifest.json");
  if (!mf)
    throw Error(ErrorCode::kIo,
                "cannot read " + (dir / "manifest.json").string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(mf);
  } catch (const nlohmann::json::exception &e) {
    throw SchemaError(std::string("manifest.json: ") + e.what(), 1);
  }

  Checkpoint<T> ckpt;
  std::string precision;
  try {
    if (manifest.at("format") != "ringkit-checkpoint")
      throw SchemaError("not a ringkit checkpoint", 1);
    precision = manifest.at("precision").get<std::string>();
    for (const auto &p: manifest.at("params")) {
      ckpt.names.push_back(p.at("name").get<std::string>());
      ckpt.params.emplace_back(p.at("shape").get<Shape>());
    }
    ckpt.metadata = manifest.value("metadata", nlohmann::json::object());
  } catch (const nlohmann::json::exception &e) {
    throw SchemaError(std::string("manifest.json: ") + e.what(), 1);
  }
  if (precision != "f32" && precision != "f64")
    throw SchemaError("unknown precision " + precision, 1);

  std::ifstream bin(dir / "params.bin", std::ios::binary);
  if (!bin)
    throw Error(ErrorCode::kIo, "cannot read " + (dir / "params.bin").string());
  for (Tensor<T> &p: ckpt.params) {
    if (precision == "f32")
      read_values<float>(bin, p);
    else
      read_values<double>(bin, p);
  }
  if (bin.peek() != std::char_traits<char>::eof())
    throw Error(ErrorCode::kIo, "params.bin is longer than the manifest");
  return ckpt;
}

template void save_checkpoint(const std::filesystem::path &,
                              const Checkpoint<float> &);
template void save_checkpoint(const std::filesystem::path &,
                              const Checkpoint<double> &);
template Checkpoint<float> load_checkpoint(const std::filesystem::path &);
template Checkpoint<double> load_checkpoint(const std::filesystem::path &);

}  // namespace ringkit::tensor
