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

// Binary model snapshots. The byte layout is described in
// docs/checkpoint_format.md.

#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "dqpsa/model.h"

namespace dqpsa {

inline constexpr std::string_view kCheckpointMagic = "DQPSA1";

std::string SerializeCheckpoint(const DqpsaModel& model);
// Throws FormatError on a bad magic, a truncated file or a parameter whose
// name or shape disagrees with the geometry record.
DqpsaModel DeserializeCheckpoint(std::string_view bytes);

void SaveCheckpoint(const DqpsaModel& model, const std::filesystem::path& path);
DqpsaModel LoadCheckpoint(const std::filesystem::path& path);

}  // namespace dqpsa
