// Copyright 2026 The DistillForge Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "distillforge/matrix.hpp"
#include "distillforge/rng.hpp"

namespace distillforge {

enum class RecordKind { kPassage, kQuestion, kCaption };

std::string_view to_string(RecordKind kind) noexcept;
RecordKind parse_record_kind(std::string_view s);

struct CorpusRecord {
  std::string id;
  std::string text;
  RecordKind kind = RecordKind::kPassage;
  /// Id of the document a chunk was cut from; empty for untouched records.
  std::string source_id;

  friend bool operator==(const CorpusRecord&, const CorpusRecord&) = default;
};

using Corpus = std::vector<CorpusRecord>;

/// Document transforms applied to the text corpus before distillation.
struct TransformPlan {
  double chunk_fraction = 0.30;
  std::size_t chunk_min_sentences = 1;
  std::size_t chunk_max_sentences = 10;
  double shuffle_fraction = 0.0008;
  std::uint64_t seed = 0;

  /// Throws ConfigError on out-of-range fields.
  void validate() const;
};

struct TransformSummary {
  std::size_t input_records = 0;
  std::size_t filtered_empty = 0;
  std::size_t selected_for_chunking = 0;
  std::size_t chunks_emitted = 0;
  std::size_t shuffled = 0;
  std::size_t output_records = 0;
};

struct TransformResult {
  Corpus corpus;
  TransformSummary summary;
};

/// Splits after a run of '.', '!' or '?' that is followed by the end of the
/// text, or by whitespace and then a character that is not a lowercase ASCII
/// letter. Sentences are trimmed; empty sentences are never produced.
std::vector<std::string> sentence_split(std::string_view text);

/// Fisher-Yates shuffle of the whitespace tokens, rejoined with single spaces.
std::string word_shuffle(std::string_view text, Rng& rng);

/// 1. Bernoulli(chunk_fraction) per document selects documents that are
///    replaced by consecutive chunks of uniform length in
///    [chunk_min, chunk_max] sentences (ids "<id>#c<k>").
/// 2. Bernoulli(shuffle_fraction) per resulting record shuffles its words.
/// Pure function of (corpus, plan).
TransformResult apply_transforms(const Corpus& corpus, const TransformPlan& plan);

/// JSON-lines corpus, one {"id","text","kind"[,"source_id"]} object per line.
Corpus read_corpus_jsonl(const std::filesystem::path& path);
void write_corpus_jsonl(const std::filesystem::path& path, const Corpus& corpus);

/// Binary embedding container ("EMB1"): u32 count, u32 dim, then per record
/// u16 id length, UTF-8 id bytes, dim little-endian f32 values.
struct EmbeddingSet {
  std::vector<std::string> ids;
  Matrix values;  // ids.size() x dim

  std::size_t dim() const noexcept { return values.cols(); }
};

EmbeddingSet read_embedding_file(const std::filesystem::path& path);
void write_embedding_file(const std::filesystem::path& path, const EmbeddingSet& set);
EmbeddingSet decode_embeddings(std::string_view bytes);
std::string encode_embeddings(const EmbeddingSet& set);

/// Groups vision-feature rows keyed "<image>#token-<k>" into one token matrix
/// per image, in order of first appearance and ascending k.
std::map<std::string, Matrix> group_vision_tokens(const EmbeddingSet& set);

/// Position of a BatchIterator; enough to resume the stream exactly.
struct BatchCursor {
  std::uint64_t epoch = 0;
  std::uint64_t position = 0;  // index of the next batch within the epoch

  friend bool operator==(const BatchCursor&, const BatchCursor&) = default;
};

/// Deterministic batch stream over item indices [0, n). Each epoch uses the
/// permutation drawn from Rng(seed, epoch); the trailing partial batch of an
/// epoch is dropped.
class BatchIterator {
 public:
  BatchIterator(std::size_t n_items, std::size_t batch_size, std::uint64_t seed, bool repeat,
                BatchCursor cursor = {});

  std::optional<std::vector<std::size_t>> next();

  BatchCursor cursor() const noexcept { return cursor_; }
  std::size_t batches_per_epoch() const noexcept { return n_items_ / batch_size_; }

 private:
  void load_epoch();

  std::size_t n_items_;
  std::size_t batch_size_;
  std::uint64_t seed_;
  bool repeat_;
  BatchCursor cursor_;
  std::uint64_t loaded_epoch_ = ~std::uint64_t{0};
  std::vector<std::size_t> perm_;
};

}  // namespace distillforge
