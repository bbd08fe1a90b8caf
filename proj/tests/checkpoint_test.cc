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


#include <cstdint>
#include <string>

#include <gtest/gtest.h>

#include "dqpsa/checkpoint.h"
#include "dqpsa/errors.h"
#include "dqpsa/reference.h"

namespace dqpsa {
namespace {

TEST(CheckpointTest, RoundTripReproducesEveryParameter) {
  for (Variant v : {Variant::kFull, Variant::kNoPdq, Variant::kNoEpe, Variant::kPsa}) {
    const DqpsaModel model(ReferenceGeometry(v), 31);
    const std::string bytes = SerializeCheckpoint(model);
    const DqpsaModel back = DeserializeCheckpoint(bytes);
    EXPECT_EQ(back.geometry(), model.geometry());
    EXPECT_EQ(back.params().Snapshot(), model.params().Snapshot());
    EXPECT_EQ(SerializeCheckpoint(back), bytes);
  }
}

TEST(CheckpointTest, LayoutStartsWithMagicAndFieldCount) {
  const DqpsaModel model(ReferenceGeometry(), 1);
  const std::string bytes = SerializeCheckpoint(model);
  ASSERT_GT(bytes.size(), 10u);
  EXPECT_EQ(bytes.substr(0, 6), kCheckpointMagic);
  std::uint32_t fields = 0;
  for (int b = 3; b >= 0; --b) {
    fields = (fields << 8) | static_cast<unsigned char>(bytes[6 + b]);
  }
  EXPECT_EQ(fields, 12u);
}

TEST(CheckpointTest, CorruptInputsAreFormatErrors) {
  const DqpsaModel model(ReferenceGeometry(), 1);
  const std::string bytes = SerializeCheckpoint(model);
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(DeserializeCheckpoint(bad_magic), FormatError);
  EXPECT_THROW(DeserializeCheckpoint(bytes.substr(0, bytes.size() - 3)), FormatError);
  EXPECT_THROW(DeserializeCheckpoint(bytes + "x"), FormatError);
  // Flip a byte of the first parameter name.
  std::string bad_name = bytes;
  const auto pos = bad_name.find("image_stub.proj");
  ASSERT_NE(pos, std::string::npos);
  bad_name[pos] = 'j';
  EXPECT_THROW(DeserializeCheckpoint(bad_name), FormatError);
}

TEST(CheckpointTest, MissingFileIsReported) {
  EXPECT_THROW(LoadCheckpoint("/nonexistent/dir/model.ckpt"), MissingFileError);
}

}  // namespace
}  // namespace dqpsa
