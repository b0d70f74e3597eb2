// Copyright 2026 The qlimit Authors
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

#pragma once

#include <filesystem>
#include <vector>

#include "qlimit/montecarlo.hpp"

namespace qlimit {

// Long-format record CSV: `scheme,seed,trial,component_index,value`, one
// row per outcome component, preceded by `header` comment lines (if any).
void write_records_csv(const std::filesystem::path& path, const std::vector<TrialRecord>& records,
                       const std::vector<std::string>& header = {});

// Reads records back; the scene is not stored in the CSV and is set from
// `scene`. Rows of one trial must be contiguous and in component order.
std::vector<TrialRecord> read_records_csv(const std::filesystem::path& path, const Scene& scene);

// JSON sidecar with the scene and scheme parameters of a record batch.
void write_records_sidecar(const std::filesystem::path& path, const Scene& scene,
                           const SchemeParams& params, std::uint64_t seed, std::uint64_t trials);

}  // namespace qlimit
