/*
 * Copyright 2026 The PhishLens Authors.
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

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "phishlens/error.h"
#include "phishlens/model.h"

namespace phishlens {
namespace {

constexpr char kMagic[4] = {'P', 'H', 'L', '1'};
constexpr std::size_t kLengthBytes = 8;

void PutU64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t GetU64(const char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  }
  return v;
}

[[noreturn]] void Corrupt(const std::string& path, const std::string& why) {
  throw Error(ErrorKind::kCheckpointCorrupt, "checkpoint " + path + ": " + why);
}

}  // namespace

void SaveCheckpoint(const ModelParameters& params, const std::string& path) {
  nlohmann::ordered_json table = nlohmann::ordered_json::object();
  std::string data;
  params.tensors.ForEach([&](std::string_view name, TensorRole, const Matrix& t) {
    table[std::string(name)] = {{"shape", {t.rows(), t.cols()}},
                                {"dtype", "f64"},
                                {"offset", data.size()}};
    // Row-major element order, independent of Eigen's storage order.
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
      for (Eigen::Index c = 0; c < t.cols(); ++c) {
        PutU64(data, std::bit_cast<std::uint64_t>(t(r, c)));
      }
    }
  });
  nlohmann::ordered_json header;
  header["config"] = nlohmann::ordered_json::parse(params.config.ToJson().dump());
  header["tensors"] = std::move(table);
  const std::string header_text = header.dump();

  std::string blob(kMagic, sizeof(kMagic));
  PutU64(blob, header_text.size());
  blob += header_text;
  blob += data;

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write checkpoint " + path);
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw Error(ErrorKind::kIo, "failed writing checkpoint " + path);
}

ModelParameters LoadCheckpoint(const std::string& path,
                               const ModelConfig* expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot read checkpoint " + path);
  const std::string blob((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());

  if (blob.size() < sizeof(kMagic) + kLengthBytes ||
      std::memcmp(blob.data(), kMagic, sizeof(kMagic)) != 0) {
    Corrupt(path, "bad magic");
  }
  const std::uint64_t header_len = GetU64(blob.data() + sizeof(kMagic));
  const std::size_t data_start = sizeof(kMagic) + kLengthBytes;
  if (header_len > blob.size() - data_start) Corrupt(path, "truncated header");

  nlohmann::ordered_json header;
  ModelConfig config;
  try {
    header = nlohmann::ordered_json::parse(blob.substr(data_start, header_len));
    config = ModelConfig::FromJson(nlohmann::json::parse(header.at("config").dump()));
    config.Validate();
  } catch (const nlohmann::json::exception& e) {
    Corrupt(path, std::string("unreadable header: ") + e.what());
  } catch (const Error& e) {
    Corrupt(path, e.what());
  }
  if (expected != nullptr && !(*expected == config)) {
    throw Error(ErrorKind::kShapeMismatch,
                "checkpoint " + path + " config " + config.ToJson().dump() +
                    " differs from expected " + expected->ToJson().dump());
  }

  const char* data = blob.data() + data_start + header_len;
  const std::size_t data_size = blob.size() - data_start - header_len;
  ModelParameters params{config, ModelTensors::Zeros(config), 0};
  std::size_t consumed = 0;
  params.tensors.ForEach([&](std::string_view name, TensorRole, Matrix& t) {
    const std::string key(name);
    if (!header.contains("tensors") || !header["tensors"].contains(key)) {
      Corrupt(path, "missing tensor " + key);
    }
    const auto& entry = header["tensors"][key];
    std::size_t rows = 0, cols = 0, offset = 0;
    std::string dtype;
    try {
      rows = entry.at("shape").at(0).get<std::size_t>();
      cols = entry.at("shape").at(1).get<std::size_t>();
      offset = entry.at("offset").get<std::size_t>();
      dtype = entry.at("dtype").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      Corrupt(path, "bad table entry for " + key);
    }
    if (rows != static_cast<std::size_t>(t.rows()) ||
        cols != static_cast<std::size_t>(t.cols())) {
      throw Error(ErrorKind::kShapeMismatch,
                  "checkpoint " + path + ": tensor " + key + " is " +
                      std::to_string(rows) + "x" + std::to_string(cols) +
                      ", config implies " + std::to_string(t.rows()) + "x" +
                      std::to_string(t.cols()));
    }
    if (dtype != "f64") Corrupt(path, "unsupported dtype " + dtype);
    const std::size_t bytes = rows * cols * 8;
    if (offset > data_size || bytes > data_size - offset) {
      Corrupt(path, "tensor " + key + " data is truncated");
    }
    const char* p = data + offset;
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
      for (Eigen::Index c = 0; c < t.cols(); ++c, p += 8) {
        t(r, c) = std::bit_cast<double>(GetU64(p));
      }
    }
    consumed += bytes;
  });
  if (consumed != data_size) Corrupt(path, "trailing or missing tensor data");
  return params;
}

}  // namespace phishlens
