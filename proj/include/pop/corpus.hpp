#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace pop {

/// A validated, truncated corpus excerpt. Text is the first word_count
/// words of the source record, rejoined with single spaces.
struct Document {
  std::string id;
  std::string text;
  std::size_t word_count = 0;
  std::string source;
};

inline constexpr std::size_t kMinDocumentWords = 50;
inline constexpr std::size_t kMaxDocumentWords = 1024;

enum class CorpusFormat { kJsonlField, kPlainLines, kTextDir };

std::string to_string(CorpusFormat format);
std::optional<CorpusFormat> corpus_format_from_string(std::string_view name);

/// Addressable view over a corpus on disk. Records are indexed 0-based;
/// record text is fetched lazily, never held in memory as a whole.
class CorpusHandle {
 public:
  std::size_t record_count() const { return records_.size(); }
  const std::string& path() const { return path_; }
  CorpusFormat format() const { return format_; }

  /// Raw text of record `index`. Throws std::out_of_range on bad index and
  /// std::runtime_error if the backing file went away.
  std::string record_text(std::size_t index) const;

  /// Short human-readable name for record `index` ("file.jsonl:12" or a
  /// file path for directory corpora).
  std::string record_name(std::size_t index) const;

  /// Stable identifier for record `index` (corpus stem + record index).
  std::string record_id(std::size_t index) const;

 private:
  friend CorpusHandle load_corpus(const std::string&, CorpusFormat,
                                  const std::optional<std::string>&, bool);
  struct Record {
    // Byte offset/length into `path_` for line-based formats; for
    // directory corpora `file` holds the member path instead.
    std::uint64_t offset = 0;
    std::uint64_t length = 0;
    std::string file;
  };

  std::string path_;
  std::string stem_;
  CorpusFormat format_ = CorpusFormat::kPlainLines;
  std::optional<std::string> text_field_;
  std::vector<Record> records_;
};

/// Scans the corpus and indexes every record. `text_field` is required for
/// the jsonl format. With strict=true a malformed record throws (message
/// names the record index); otherwise it is skipped with a note to stderr.
CorpusHandle load_corpus(const std::string& path, CorpusFormat format,
                         const std::optional<std::string>& text_field = {},
                         bool strict = false);

/// Word-count gate and truncation: rejects texts under 50 words, truncates
/// to the first 1024 words, normalizes inner whitespace to single spaces.
/// Returns nullopt on rejection. id/source are left for the caller to fill.
std::optional<Document> validate_and_truncate(std::string_view raw_text);

struct SampleResult {
  std::vector<Document> documents;
  bool exhausted = false;  // corpus ran out before n valid documents
};

/// Draws record indices uniformly without replacement from a seeded
/// deterministic generator and keeps drawing until n valid documents are
/// produced or the corpus is exhausted. Output order is draw order;
/// identical (handle, n, seed) yields identical output.
SampleResult sample_documents(const CorpusHandle& handle, std::size_t n,
                              std::uint64_t seed);

}  // namespace pop
