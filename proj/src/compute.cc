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

#include "mgvo/compute.h"

#include <spawn.h>
#include <sys/wait.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "mgvo/error.h"
#include "mgvo/fnv.h"

extern char** environ;

namespace mgvo {
namespace fs = std::filesystem;
namespace {

void WriteBytes(const fs::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIoFailure, "cannot write " + path.string());
}

std::optional<std::string> ReadBytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

}  // namespace

bool IsBuiltinAlgorithm(std::string_view id) { return id == kSmfNormId; }

Lfn BuiltinLfn(std::string_view id) {
  return Lfn{std::string(kBuiltinSite), LfnCategory::kAlgorithms, std::string(id)};
}

std::string BuiltinChecksum(std::string_view id) {
  return Checksum("builtin:" + std::string(id));
}

Lfn AlgorithmLfn(std::string_view site, std::string_view name,
                 std::string_view version) {
  Lfn lfn{std::string(site), LfnCategory::kAlgorithms,
          std::string(name) + "-" + std::string(version)};
  return Lfn::Parse(lfn.ToString());
}

Lfn DerivedLfn(std::string_view site, std::string_view name,
               std::string_view version, std::string_view input_sop_uid) {
  Lfn lfn{std::string(site), LfnCategory::kSmf,
          std::string(name) + "-" + std::string(version) + "-" +
              std::string(input_sop_uid)};
  return Lfn::Parse(lfn.ToString());
}

std::string DerivedSopUid(std::string_view input_sop_uid, std::string_view name,
                          std::string_view version) {
  Fnv1a64Hasher h;
  h.Update(input_sop_uid);
  h.Update(":");
  h.Update(name);
  h.Update(":");
  h.Update(version);
  return Hex64(h.digest());
}

std::vector<std::uint16_t> SmfNormSamples(std::span<const std::uint16_t> samples) {
  std::vector<std::uint16_t> out(samples.size(), 0);
  if (samples.empty()) return out;
  auto [lo_it, hi_it] = std::minmax_element(samples.begin(), samples.end());
  const std::uint64_t lo = *lo_it;
  const std::uint64_t range = *hi_it - lo;
  if (range == 0) return out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    // round half up of (v - lo) * 65535 / range, in exact integer arithmetic
    std::uint64_t scaled = (samples[i] - lo) * 65535u * 2 + range;
    out[i] = static_cast<std::uint16_t>(scaled / (2 * range));
  }
  return out;
}

DicomFile SmfNorm(const DicomFile& input) {
  if (!input.Has(tags::kPixelData)) {
    throw Error(ErrorCode::kNoPixelData, "input has no PixelData");
  }
  auto rows = input.GetUs(tags::kRows);
  auto cols = input.GetUs(tags::kColumns);
  if (!rows || !cols || input.GetUs(tags::kBitsAllocated) != 16) {
    throw Error(ErrorCode::kPixelGeometryMismatch, "smf-norm needs 16-bit pixels");
  }
  DicomFile out = input;
  auto samples = SmfNormSamples(input.PixelSamples());
  out.SetPixels(*rows, *cols, samples);
  return out;
}

std::string FormatJobLine(const JobRecord& job) {
  return job.job_id + "|" + job.name + "|" + job.version + "|" + job.input_lfn +
         "|" + job.output_lfn.value_or("") + "|" +
         (job.status == JobStatus::kDone ? "DONE" : "FAILED") + "|" + job.site +
         "|" + std::to_string(job.elapsed_ms);
}

std::string RunExecutable(const fs::path& executable, const fs::path& input,
                          const fs::path& output) {
  std::string exe = executable.string();
  std::string in = input.string();
  std::string out = output.string();
  char* argv[] = {exe.data(), in.data(), out.data(), nullptr};
  pid_t pid = 0;
  int rc = ::posix_spawn(&pid, exe.c_str(), nullptr, nullptr, argv, environ);
  if (rc != 0) {
    throw Error(ErrorCode::kExecutionFailed,
                "cannot start " + exe + ": " + std::to_string(rc));
  }
  int status = 0;
  if (::waitpid(pid, &status, 0) < 0) {
    throw Error(ErrorCode::kExecutionFailed, "waitpid failed for " + exe);
  }
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    throw Error(ErrorCode::kExecutionFailed,
                "exit status " + std::to_string(WIFEXITED(status)
                                                    ? WEXITSTATUS(status)
                                                    : 128 + WTERMSIG(status)));
  }
  auto bytes = ReadBytes(output);
  if (!bytes) throw Error(ErrorCode::kExecutionFailed, "no output written");
  return std::move(*bytes);
}

ComputeElement::ComputeElement(std::string site, StorageElement& storage,
                               Catalog& catalog, const Clock& clock,
                               fs::path work_root, fs::path jobs_log)
    : site_(std::move(site)),
      storage_(storage),
      catalog_(catalog),
      clock_(clock),
      work_root_(std::move(work_root)),
      jobs_log_(std::move(jobs_log)) {
  fs::create_directories(work_root_);
}

JobRecord ComputeElement::Execute(const AlgorithmRow& algorithm,
                                  const Lfn& input) {
  Key key{algorithm.name, algorithm.version, input.ToString()};
  std::promise<JobRecord> promise;
  std::shared_future<JobRecord> future;
  bool owner = false;
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = running_.find(key);
    if (it != running_.end()) {
      future = it->second;
    } else {
      future = promise.get_future().share();
      running_.emplace(key, future);
      owner = true;
    }
  }
  if (!owner) return future.get();
  try {
    promise.set_value(Run(algorithm, input));
  } catch (...) {
    promise.set_exception(std::current_exception());
  }
  {
    std::lock_guard<std::mutex> lock(mu_);
    running_.erase(key);
  }
  return future.get();
}

JobRecord ComputeElement::Run(const AlgorithmRow& algorithm, const Lfn& input) {
  const std::int64_t start = clock_.NowMs();
  JobRecord job;
  {
    std::lock_guard<std::mutex> lock(mu_);
    job.job_id = Hex64(Fnv1a64(site_ + ":" + algorithm.name + ":" +
                               algorithm.version + ":" + input.ToString() + ":" +
                               std::to_string(++job_seq_)));
  }
  job.name = algorithm.name;
  job.version = algorithm.version;
  job.input_lfn = input.ToString();
  job.site = site_;

  auto input_row = catalog_.FindImageByLfn(input.ToString());
  if (input.site != site_ || !input_row) {
    throw Error(ErrorCode::kInputNotFound, input.ToString() + " at " + site_);
  }
  if (!algorithm.builtin && !storage_.Contains(Lfn::Parse(algorithm.lfn))) {
    throw Error(ErrorCode::kAlgorithmNotFound,
                algorithm.lfn + " not present at " + site_);
  }

  try {
    const std::string new_sop =
        DerivedSopUid(input_row->sop_uid, algorithm.name, algorithm.version);
    const Lfn output = DerivedLfn(site_, algorithm.name, algorithm.version,
                                  input_row->sop_uid);
    std::string bytes =
        Produce(algorithm, *input_row, storage_.Get(input), new_sop, job.job_id);
    std::string checksum = Checksum(bytes);
    job.output_lfn = output.ToString();

    if (auto existing = catalog_.FindImageByLfn(output.ToString())) {
      if (existing->checksum != checksum) {
        throw Error(ErrorCode::kExecutionFailed,
                    "non-deterministic output for " + output.ToString());
      }
      job.idempotent = true;
    } else {
      try {
        storage_.Put(output, bytes);
      } catch (const Error& e) {
        // A blob left by an interrupted earlier run: keep it if identical.
        if (e.code() != ErrorCode::kAlreadyExists ||
            storage_.Stat(output)->checksum != checksum) {
          throw;
        }
      }
      auto patient = catalog_.FindPatient(input_row->pseudonym);
      ImageRegistration reg;
      reg.meta = ImageMeta{new_sop,           input_row->pseudonym,
                           patient->sex,      patient->age_years,
                           input_row->laterality, input_row->study_date};
      reg.lfn = output;
      reg.kind = ImageKind::kSmf;
      reg.source_sop_uid = input_row->sop_uid;
      reg.size_bytes = bytes.size();
      reg.checksum = checksum;
      catalog_.RegisterImage(reg);
    }
    job.status = JobStatus::kDone;
    job.elapsed_ms = clock_.NowMs() - start;
    Log(job);
    return job;
  } catch (const Error& e) {
    job.status = JobStatus::kFailed;
    job.elapsed_ms = clock_.NowMs() - start;
    Log(job);
    if (e.code() == ErrorCode::kExecutionFailed) throw;
    throw Error(ErrorCode::kExecutionFailed, e.what());
  }
}

std::string ComputeElement::Produce(const AlgorithmRow& algorithm,
                                    const ImageRow& input,
                                    const std::string& input_bytes,
                                    const std::string& new_sop,
                                    const std::string& job_id) {
  if (algorithm.builtin) {
    std::string id = Lfn::Parse(algorithm.lfn).name;
    if (id != kSmfNormId) {
      throw Error(ErrorCode::kAlgorithmNotFound, "unknown builtin " + id);
    }
    DicomFile out = SmfNorm(ParseDicom(input_bytes));
    out.SetText(tags::kSopInstanceUid, Vr::kUI, new_sop);
    return WriteDicom(out);
  }
  fs::path dir = work_root_ / job_id;
  fs::create_directories(dir);
  struct Cleanup {
    fs::path dir;
    ~Cleanup() {
      std::error_code ec;
      fs::remove_all(dir, ec);
    }
  } cleanup{dir};
  fs::path exe = dir / "algorithm";
  WriteBytes(exe, storage_.Get(Lfn::Parse(algorithm.lfn)));
  fs::permissions(exe, fs::perms::owner_all, fs::perm_options::replace);
  fs::path in = dir / input.sop_uid;
  WriteBytes(in, input_bytes);
  return RunExecutable(exe, in, dir / "output");
}

void ComputeElement::Log(const JobRecord& job) {
  std::lock_guard<std::mutex> lock(mu_);
  std::ofstream out(jobs_log_, std::ios::app);
  out << FormatJobLine(job) << "\n";
}

}  // namespace mgvo
