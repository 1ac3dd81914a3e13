// tools/service.hpp

// Copyright 2026  The CDI Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef CDI_TOOLS_SERVICE_HPP_
#define CDI_TOOLS_SERVICE_HPP_

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>

#include "cdi/corpus.hpp"

namespace cdi {

// Store layout:
//   corpora/<corpus_id>/{dataset.jsonl, embeddings.cdie, meta.json}
//   sessions/<session_id>/{handle.json, events.jsonl, checkpoint.cdim, summary.json}
//
// Corpus ids are derived from the content fingerprint, so registering the
// same files twice yields the same id.
std::string RegisterCorpus(const std::filesystem::path &store, std::string_view dataset_jsonl,
                           std::string_view cdie_bytes);
std::shared_ptr<const Corpus> LoadStoredCorpus(const std::filesystem::path &store, const std::string &corpus_id);

class Service {
 public:
  explicit Service(std::filesystem::path store);
  ~Service();
  Service(const Service &) = delete;
  Service &operator=(const Service &) = delete;

  // Binds the listening socket; port 0 picks a free port. Returns the port.
  int Bind(const std::string &host, int port);
  // Serves until Stop(). Requires Bind().
  void Listen();
  void Stop();

 private:
  class Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace cdi

#endif  // CDI_TOOLS_SERVICE_HPP_
