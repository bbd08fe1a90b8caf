// Copyright 2026 The dqpsa Authors.
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

#include "dqpsa/checkpoint.h"

#include <array>
#include <bit>
#include <cstdint>

#include "dqpsa/data.h"
#include "dqpsa/errors.h"

namespace dqpsa {
namespace {

constexpr int kGeometryFields = 12;

void PutU32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void PutU64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::string_view Take(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(std::string("checkpoint truncated in ") + what);
    }
    std::string_view s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint32_t U32(const char* what) {
    std::string_view s = Take(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(static_cast<unsigned char>(s[i])) << (8 * i);
    return v;
  }
  std::uint64_t U64(const char* what) {
    std::string_view s = Take(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(static_cast<unsigned char>(s[i])) << (8 * i);
    return v;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::array<int, kGeometryFields> GeometryFields(const ModelGeometry& g) {
  return {g.vocab_size, g.width,      g.pdq_blocks,  g.text_blocks,
          g.heads,      g.prompt_len, g.image_width, g.raw_width,
          g.ffn_mult,   g.max_len,    g.energy_width, static_cast<int>(g.variant)};
}

}  // namespace

std::string SerializeCheckpoint(const DqpsaModel& model) {
  std::string out(kCheckpointMagic);
  PutU32(out, kGeometryFields);
  for (int v : GeometryFields(model.geometry())) PutU32(out, static_cast<std::uint32_t>(v));
  const auto params = model.params().All();
  PutU32(out, static_cast<std::uint32_t>(params.size()));
  for (const Parameter* p : params) {
    PutU32(out, static_cast<std::uint32_t>(p->name.size()));
    out += p->name;
    PutU32(out, static_cast<std::uint32_t>(p->value.rows()));
    PutU32(out, static_cast<std::uint32_t>(p->value.cols()));
    for (double v : p->value.values()) PutU64(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

DqpsaModel DeserializeCheckpoint(std::string_view bytes) {
  Reader in(bytes);
  if (in.Take(kCheckpointMagic.size(), "magic") != kCheckpointMagic) {
    throw FormatError("not a checkpoint (bad magic)");
  }
  const std::uint32_t fields = in.U32("geometry record");
  if (fields != kGeometryFields) {
    throw FormatError("unsupported geometry record of " + std::to_string(fields) +
                      " fields");
  }
  std::array<int, kGeometryFields> f{};
  for (int& v : f) v = static_cast<int>(in.U32("geometry record"));
  if (f[11] < 0 || f[11] > static_cast<int>(Variant::kPsa)) {
    throw FormatError("unknown variant code " + std::to_string(f[11]));
  }
  ModelGeometry g;
  g.vocab_size = f[0];
  g.width = f[1];
  g.pdq_blocks = f[2];
  g.text_blocks = f[3];
  g.heads = f[4];
  g.prompt_len = f[5];
  g.image_width = f[6];
  g.raw_width = f[7];
  g.ffn_mult = f[8];
  g.max_len = f[9];
  g.energy_width = f[10];
  g.variant = static_cast<Variant>(f[11]);
  DqpsaModel model = [&] {
    try {
      return DqpsaModel(g, 0);
    } catch (const ConfigError& e) {
      throw FormatError(std::string("checkpoint geometry invalid: ") + e.what());
    }
  }();

  const auto params = model.params().All();
  const std::uint32_t count = in.U32("parameter count");
  if (count != params.size()) {
    throw FormatError("checkpoint has " + std::to_string(count) +
                      " parameters, geometry implies " + std::to_string(params.size()));
  }
  for (Parameter* p : params) {
    const std::uint32_t len = in.U32("parameter name");
    const std::string_view name = in.Take(len, "parameter name");
    if (name != p->name) {
      throw FormatError("expected parameter '" + p->name + "', found '" +
                        std::string(name) + "'");
    }
    const std::uint32_t rows = in.U32("parameter shape");
    const std::uint32_t cols = in.U32("parameter shape");
    if (static_cast<int>(rows) != p->value.rows() ||
        static_cast<int>(cols) != p->value.cols()) {
      throw FormatError("parameter '" + p->name + "' has shape [" +
                        std::to_string(rows) + "x" + std::to_string(cols) +
                        "], expected " + p->value.ShapeString());
    }
    for (double& v : p->value.values()) v = std::bit_cast<double>(in.U64("values"));
  }
  if (!in.done()) throw FormatError("trailing bytes after checkpoint");
  return model;
}

void SaveCheckpoint(const DqpsaModel& model, const std::filesystem::path& path) {
  WriteFileAtomic(path, SerializeCheckpoint(model));
}

DqpsaModel LoadCheckpoint(const std::filesystem::path& path) {
  return DeserializeCheckpoint(ReadFile(path));
}

}  // namespace dqpsa
