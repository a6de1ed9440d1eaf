#include "pop/corpus.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "pop/text.hpp"

namespace fs = std::filesystem;

namespace pop {

namespace {

std::string corpus_stem(const std::string& path) {
  fs::path p(path);
  std::string stem = p.stem().string();
  return stem.empty() ? p.string() : stem;
}

// Uniform integer in [0, bound) from a mt19937_64 stream via rejection
// sampling; bit-identical across platforms, unlike
// std::uniform_int_distribution.
std::uint64_t bounded_uniform(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit =
      std::numeric_limits<std::uint64_t>::max() -
      std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t v;
  do {
    v = rng();
  } while (v >= limit);
  return v % bound;
}

}  // namespace

std::string to_string(CorpusFormat format) {
  switch (format) {
    case CorpusFormat::kJsonlField: return "jsonl-field";
    case CorpusFormat::kPlainLines: return "plain-lines";
    case CorpusFormat::kTextDir: return "directory-of-text-files";
  }
  return "unknown";
}

std::optional<CorpusFormat> corpus_format_from_string(std::string_view name) {
  if (name == "jsonl-field" || name == "jsonl") return CorpusFormat::kJsonlField;
  if (name == "plain-lines" || name == "lines") return CorpusFormat::kPlainLines;
  if (name == "directory-of-text-files" || name == "dir")
    return CorpusFormat::kTextDir;
  return std::nullopt;
}

std::string CorpusHandle::record_text(std::size_t index) const {
  if (index >= records_.size())
    throw std::out_of_range("corpus record index " + std::to_string(index) +
                            " out of range (count " +
                            std::to_string(records_.size()) + ")");
  const Record& rec = records_[index];
  if (format_ == CorpusFormat::kTextDir) {
    std::ifstream in(rec.file, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read corpus file: " + rec.file);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
  }
  std::ifstream in(path_, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read corpus file: " + path_);
  in.seekg(static_cast<std::streamoff>(rec.offset));
  std::string line(rec.length, '\0');
  in.read(line.data(), static_cast<std::streamsize>(rec.length));
  if (!in) throw std::runtime_error("short read from corpus file: " + path_);
  if (format_ == CorpusFormat::kPlainLines) return line;
  auto parsed = nlohmann::json::parse(line, nullptr, false);
  if (parsed.is_discarded() || !parsed.contains(*text_field_) ||
      !parsed[*text_field_].is_string())
    throw std::runtime_error("malformed jsonl record at index " +
                             std::to_string(index));
  return parsed[*text_field_].get<std::string>();
}

std::string CorpusHandle::record_name(std::size_t index) const {
  const Record& rec = records_.at(index);
  if (format_ == CorpusFormat::kTextDir) return rec.file;
  return path_ + ":" + std::to_string(index);
}

std::string CorpusHandle::record_id(std::size_t index) const {
  return stem_ + "/" + std::to_string(index);
}

CorpusHandle load_corpus(const std::string& path, CorpusFormat format,
                         const std::optional<std::string>& text_field,
                         bool strict) {
  if (format == CorpusFormat::kJsonlField && !text_field)
    throw std::invalid_argument("jsonl-field corpus requires a text field name");

  CorpusHandle handle;
  handle.path_ = path;
  handle.stem_ = corpus_stem(path);
  handle.format_ = format;
  handle.text_field_ = text_field;

  if (format == CorpusFormat::kTextDir) {
    if (!fs::is_directory(path))
      throw std::runtime_error("corpus path is not a directory: " + path);
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(path)) {
      if (entry.is_regular_file()) files.push_back(entry.path().string());
    }
    std::sort(files.begin(), files.end());
    for (auto& f : files) {
      CorpusHandle::Record rec;
      rec.file = std::move(f);
      handle.records_.push_back(std::move(rec));
    }
    return handle;
  }

  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open corpus: " + path);

  std::string line;
  std::uint64_t offset = 0;
  std::size_t raw_index = 0;
  while (std::getline(in, line)) {
    std::uint64_t length = line.size();
    std::uint64_t next_offset = offset + length + 1;  // getline ate one '\n'
    if (!line.empty() && line.back() == '\r') --length;
    std::string_view body(line.data(), length);
    bool keep = !trim(body).empty();  // blank lines are not records
    if (keep && format == CorpusFormat::kJsonlField) {
      auto parsed = nlohmann::json::parse(body, nullptr, false);
      if (parsed.is_discarded() || !parsed.contains(*text_field) ||
          !parsed[*text_field].is_string()) {
        if (strict)
          throw std::runtime_error("malformed record at index " +
                                   std::to_string(raw_index) + " in " + path);
        std::cerr << "corpus: skipping malformed record at index " << raw_index
                  << " in " << path << "\n";
        keep = false;
      }
    }
    if (keep) {
      CorpusHandle::Record rec;
      rec.offset = offset;
      rec.length = length;
      handle.records_.push_back(rec);
    }
    ++raw_index;
    offset = next_offset;
  }
  return handle;
}

std::optional<Document> validate_and_truncate(std::string_view raw_text) {
  auto words = split_words(raw_text);
  if (words.size() < kMinDocumentWords) return std::nullopt;
  std::size_t kept = std::min(words.size(), kMaxDocumentWords);
  Document doc;
  doc.word_count = kept;
  std::string text;
  text.reserve(raw_text.size());
  for (std::size_t i = 0; i < kept; ++i) {
    if (i > 0) text.push_back(' ');
    text.append(words[i]);
  }
  doc.text = std::move(text);
  return doc;
}

SampleResult sample_documents(const CorpusHandle& handle, std::size_t n,
                              std::uint64_t seed) {
  SampleResult result;
  if (n == 0) return result;

  // Partial Fisher-Yates: each draw picks an unused record index uniformly.
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> indices(handle.record_count());
  for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;

  std::size_t drawn = 0;
  while (result.documents.size() < n && drawn < indices.size()) {
    std::size_t remaining = indices.size() - drawn;
    std::size_t pick = drawn + static_cast<std::size_t>(
                                   bounded_uniform(rng, remaining));
    std::swap(indices[drawn], indices[pick]);
    std::size_t record = indices[drawn];
    ++drawn;

    std::string raw;
    try {
      raw = handle.record_text(record);
    } catch (const std::exception& e) {
      std::cerr << "corpus: unreadable record " << record << ": " << e.what()
                << "\n";
      continue;
    }
    auto doc = validate_and_truncate(raw);
    if (!doc) continue;  // rejected records do not count against n
    doc->id = handle.record_id(record);
    doc->source = handle.record_name(record);
    result.documents.push_back(std::move(*doc));
  }
  result.exhausted = result.documents.size() < n;
  return result;
}

}  // namespace pop
