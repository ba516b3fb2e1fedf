// Copyright 2026 The MGVO Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "mgvo/catalog.h"
#include "mgvo/clock.h"
#include "mgvo/dicom.h"
#include "mgvo/lfn.h"
#include "mgvo/storage_element.h"

namespace mgvo {

inline constexpr std::string_view kSmfNormId = "smf-norm";

bool IsBuiltinAlgorithm(std::string_view id);
// lfn:/mgvo/_builtin/algorithms/<id>
Lfn BuiltinLfn(std::string_view id);
// Builtins have no payload; their checksum is fnv1a64("builtin:<id>").
std::string BuiltinChecksum(std::string_view id);
// lfn:/mgvo/<site>/algorithms/<name>-<version>
Lfn AlgorithmLfn(std::string_view site, std::string_view name,
                 std::string_view version);
// lfn:/mgvo/<site>/smf/<name>-<version>-<input-sop-uid>
Lfn DerivedLfn(std::string_view site, std::string_view name,
               std::string_view version, std::string_view input_sop_uid);
// hex64(fnv1a64(input_sop_uid ":" name ":" version))
std::string DerivedSopUid(std::string_view input_sop_uid, std::string_view name,
                          std::string_view version);

// Full-range linear rescale: round((v - min) * 65535 / (max - min)), or all
// zeros when the image is constant.
std::vector<std::uint16_t> SmfNormSamples(std::span<const std::uint16_t> samples);

// Rescales PixelData, keeping every other element. Errors: NoPixelData.
DicomFile SmfNorm(const DicomFile& input);

enum class JobStatus { kDone, kFailed };

struct JobRecord {
  std::string job_id;
  std::string name;
  std::string version;
  std::string input_lfn;
  std::optional<std::string> output_lfn;
  JobStatus status = JobStatus::kDone;
  std::string site;
  std::int64_t elapsed_ms = 0;
  // The output already existed; nothing new was registered.
  bool idempotent = false;
};

// job_id|name|version|input_lfn|output_lfn|status|site|elapsed_ms
std::string FormatJobLine(const JobRecord& job);

// Runs `executable` with argv [executable, input, output] and returns the
// output file's bytes. Errors: ExecutionFailed (spawn failure, nonzero exit,
// missing output).
std::string RunExecutable(const std::filesystem::path& executable,
                          const std::filesystem::path& input,
                          const std::filesystem::path& output);

// Computing element of one site: runs algorithms on inputs this site owns,
// stores and registers the derived file, and appends to jobs.log.
// Concurrent requests for the same (algorithm, input) share one execution.
class ComputeElement {
 public:
  ComputeElement(std::string site, StorageElement& storage, Catalog& catalog,
                 const Clock& clock, std::filesystem::path work_root,
                 std::filesystem::path jobs_log);

  // Errors: InputNotFound, AlgorithmNotFound, ExecutionFailed.
  JobRecord Execute(const AlgorithmRow& algorithm, const Lfn& input);

 private:
  using Key = std::tuple<std::string, std::string, std::string>;

  JobRecord Run(const AlgorithmRow& algorithm, const Lfn& input);
  std::string Produce(const AlgorithmRow& algorithm, const ImageRow& input,
                      const std::string& input_bytes, const std::string& new_sop,
                      const std::string& job_id);
  void Log(const JobRecord& job);

  std::string site_;
  StorageElement& storage_;
  Catalog& catalog_;
  const Clock& clock_;
  std::filesystem::path work_root_;
  std::filesystem::path jobs_log_;
  std::mutex mu_;
  std::map<Key, std::shared_future<JobRecord>> running_;
  std::uint64_t job_seq_ = 0;
};

}  // namespace mgvo
