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

#include "distillforge/datakit.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cstring>
#include <fstream>
#include <sstream>

#include "distillforge/errors.hpp"
#include "json.hpp"

namespace distillforge {

namespace {

bool is_terminal(char c) { return c == '.' || c == '!' || c == '?'; }
bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_lower(char c) { return c >= 'a' && c <= 'z'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    const std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i > start) words.emplace_back(text.substr(start, i - start));
  }
  return words;
}

std::string join(const std::vector<std::string>& parts, std::size_t first, std::size_t last) {
  std::string out;
  for (std::size_t i = first; i < last; ++i) {
    if (i > first) out.push_back(' ');
    out += parts[i];
  }
  return out;
}

}  // namespace

std::string_view to_string(RecordKind kind) noexcept {
  switch (kind) {
    case RecordKind::kPassage: return "passage";
    case RecordKind::kQuestion: return "question";
    case RecordKind::kCaption: return "caption";
  }
  return "passage";
}

RecordKind parse_record_kind(std::string_view s) {
  if (s == "passage") return RecordKind::kPassage;
  if (s == "question") return RecordKind::kQuestion;
  if (s == "caption") return RecordKind::kCaption;
  throw FormatError("unknown record kind '" + std::string(s) + "'");
}

void TransformPlan::validate() const {
  if (!(chunk_fraction >= 0.0 && chunk_fraction <= 1.0))
    throw ConfigError("chunk_fraction must lie in [0, 1]");
  if (!(shuffle_fraction >= 0.0 && shuffle_fraction <= 1.0))
    throw ConfigError("shuffle_fraction must lie in [0, 1]");
  if (chunk_min_sentences < 1) throw ConfigError("chunk sentence range must start at >= 1");
  if (chunk_max_sentences < chunk_min_sentences)
    throw ConfigError("chunk sentence range is empty");
}

std::vector<std::string> sentence_split(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_terminal(text[i])) {
      ++i;
      continue;
    }
    std::size_t end = i;
    while (end < text.size() && is_terminal(text[end])) ++end;
    std::size_t next = end;
    while (next < text.size() && is_space(text[next])) ++next;
    const bool boundary = end == text.size() || (next > end && (next == text.size() || !is_lower(text[next])));
    if (boundary) {
      const auto s = trim(text.substr(start, end - start));
      if (!s.empty()) out.emplace_back(s);
      start = next;
    }
    i = end;
  }
  if (start < text.size()) {
    const auto s = trim(text.substr(start));
    if (!s.empty()) out.emplace_back(s);
  }
  return out;
}

std::string word_shuffle(std::string_view text, Rng& rng) {
  auto words = split_words(text);
  for (std::size_t i = words.size(); i > 1; --i) {
    const std::size_t j = rng.uniform_int(i);
    std::swap(words[i - 1], words[j]);
  }
  return join(words, 0, words.size());
}

TransformResult apply_transforms(const Corpus& corpus, const TransformPlan& plan) {
  plan.validate();
  TransformResult result;
  auto& summary = result.summary;
  summary.input_records = corpus.size();

  Rng select(plan.seed, streams::kTransformSelect);
  Rng chunk_len(plan.seed, streams::kTransformChunk);
  const std::uint64_t span = plan.chunk_max_sentences - plan.chunk_min_sentences + 1;

  Corpus staged;
  staged.reserve(corpus.size());
  for (const auto& rec : corpus) {
    if (trim(rec.text).empty()) {
      ++summary.filtered_empty;
      continue;
    }
    if (!(select.uniform() < plan.chunk_fraction)) {
      staged.push_back(rec);
      continue;
    }
    ++summary.selected_for_chunking;
    const auto sentences = sentence_split(rec.text);
    std::size_t pos = 0;
    std::size_t k = 0;
    while (pos < sentences.size()) {
      const std::size_t len = plan.chunk_min_sentences + chunk_len.uniform_int(span);
      const std::size_t last = std::min(sentences.size(), pos + len);
      staged.push_back(CorpusRecord{rec.id + "#c" + std::to_string(k++),
                                    join(sentences, pos, last), rec.kind, rec.id});
      pos = last;
    }
    summary.chunks_emitted += k;
  }

  Rng shuffle_select(plan.seed, streams::kTransformShuffle);
  for (std::size_t i = 0; i < staged.size(); ++i) {
    if (shuffle_select.uniform() < plan.shuffle_fraction) {
      Rng perm = shuffle_select.split(i);
      staged[i].text = word_shuffle(staged[i].text, perm);
      ++summary.shuffled;
    }
  }
  summary.output_records = staged.size();
  result.corpus = std::move(staged);
  return result;
}

Corpus read_corpus_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open corpus file " + path.string());
  Corpus corpus;
  std::string line;
  std::size_t lineno = 0;
  std::uint64_t offset = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::uint64_t line_offset = offset;
    offset += line.size() + 1;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("line " + std::to_string(lineno) + ": " + e.what(), line_offset);
    }
    if (!j.is_object() || !j.contains("id") || !j.contains("text") || !j["id"].is_string() ||
        !j["text"].is_string()) {
      throw FormatError("line " + std::to_string(lineno) + ": expected string fields id and text",
                        line_offset);
    }
    CorpusRecord rec;
    rec.id = j["id"].get<std::string>();
    rec.text = j["text"].get<std::string>();
    if (j.contains("kind")) rec.kind = parse_record_kind(j["kind"].get<std::string>());
    if (j.contains("source_id")) rec.source_id = j["source_id"].get<std::string>();
    corpus.push_back(std::move(rec));
  }
  return corpus;
}

void write_corpus_jsonl(const std::filesystem::path& path, const Corpus& corpus) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write corpus file " + path.string());
  for (const auto& rec : corpus) {
    nlohmann::ordered_json j;
    j["id"] = rec.id;
    j["text"] = rec.text;
    j["kind"] = std::string(to_string(rec.kind));
    if (!rec.source_id.empty()) j["source_id"] = rec.source_id;
    out << j.dump() << '\n';
  }
}

// ---- EMB1 -------------------------------------------------------------------

namespace {

constexpr char kEmbMagic[4] = {'E', 'M', 'B', '1'};

template <typename T>
void put_le(std::string& out, T v) {
  static_assert(std::is_unsigned_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      v |= static_cast<T>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += sizeof(T);
    return v;
  }

  std::string_view take(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) {
    if (remaining() < n) throw FormatError(std::string("truncated ") + what, pos_);
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string encode_embeddings(const EmbeddingSet& set) {
  if (set.ids.size() != set.values.rows())
    throw ShapeMismatch("embedding set: id count does not match row count");
  std::string out(kEmbMagic, 4);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(set.ids.size()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(set.values.cols()));
  for (std::size_t r = 0; r < set.ids.size(); ++r) {
    const auto& id = set.ids[r];
    if (id.size() > 0xffff) throw FormatError("embedding id longer than 65535 bytes");
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(id.size()));
    out += id;
    for (double v : set.values.row(r))
      put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  return out;
}

EmbeddingSet decode_embeddings(std::string_view bytes) {
  ByteReader rd(bytes);
  if (rd.take(4, "magic") != std::string_view(kEmbMagic, 4)) throw FormatError("bad magic", 0);
  const auto count = rd.get<std::uint32_t>("record count");
  const auto dim = rd.get<std::uint32_t>("dimension");
  EmbeddingSet set;
  set.ids.reserve(count);
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(count) * dim);
  for (std::uint32_t r = 0; r < count; ++r) {
    const auto len = rd.get<std::uint16_t>("id length");
    set.ids.emplace_back(rd.take(len, "id"));
    for (std::uint32_t c = 0; c < dim; ++c) {
      const auto bits = rd.get<std::uint32_t>("embedding values");
      values.push_back(static_cast<double>(std::bit_cast<float>(bits)));
    }
  }
  if (rd.remaining() != 0) throw FormatError("trailing bytes after last record", rd.pos());
  set.values = Matrix(count, dim, std::move(values));
  return set;
}

EmbeddingSet read_embedding_file(const std::filesystem::path& path) {
  return decode_embeddings(slurp(path));
}

void write_embedding_file(const std::filesystem::path& path, const EmbeddingSet& set) {
  const auto bytes = encode_embeddings(set);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::map<std::string, Matrix> group_vision_tokens(const EmbeddingSet& set) {
  std::map<std::string, std::vector<std::pair<std::size_t, std::size_t>>> rows_by_image;
  for (std::size_t r = 0; r < set.ids.size(); ++r) {
    const auto& id = set.ids[r];
    const auto at = id.rfind("#token-");
    if (at == std::string::npos) throw FormatError("vision row id '" + id + "' lacks #token-k");
    std::size_t k = 0;
    try {
      k = std::stoul(id.substr(at + 7));
    } catch (const std::exception&) {
      throw FormatError("vision row id '" + id + "' has a bad token index");
    }
    rows_by_image[id.substr(0, at)].emplace_back(k, r);
  }
  std::map<std::string, Matrix> out;
  for (auto& [image, rows] : rows_by_image) {
    std::ranges::sort(rows);
    std::vector<std::size_t> index;
    for (const auto& [k, r] : rows) index.push_back(r);
    out.emplace(image, gather_rows(set.values, index));
  }
  return out;
}

// ---- batching ----------------------------------------------------------------

BatchIterator::BatchIterator(std::size_t n_items, std::size_t batch_size, std::uint64_t seed,
                             bool repeat, BatchCursor cursor)
    : n_items_(n_items), batch_size_(batch_size), seed_(seed), repeat_(repeat), cursor_(cursor) {
  if (batch_size_ == 0) throw ConfigError("batch size must be >= 1");
}

void BatchIterator::load_epoch() {
  if (loaded_epoch_ == cursor_.epoch) return;
  perm_.resize(n_items_);
  for (std::size_t i = 0; i < n_items_; ++i) perm_[i] = i;
  Rng rng(seed_, mix64(streams::kBatching) ^ cursor_.epoch);
  for (std::size_t i = n_items_; i > 1; --i) std::swap(perm_[i - 1], perm_[rng.uniform_int(i)]);
  loaded_epoch_ = cursor_.epoch;
}

std::optional<std::vector<std::size_t>> BatchIterator::next() {
  if (batches_per_epoch() == 0) return std::nullopt;
  if (cursor_.position >= batches_per_epoch()) {
    if (!repeat_) return std::nullopt;
    ++cursor_.epoch;
    cursor_.position = 0;
  }
  load_epoch();
  const auto first = perm_.begin() + static_cast<std::ptrdiff_t>(cursor_.position * batch_size_);
  std::vector<std::size_t> batch(first, first + static_cast<std::ptrdiff_t>(batch_size_));
  ++cursor_.position;
  return batch;
}

}  // namespace distillforge
