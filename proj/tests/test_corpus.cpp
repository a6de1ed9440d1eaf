#include <doctest.h>

#include <set>

#include "pop/corpus.hpp"
#include "pop/text.hpp"
#include "test_util.hpp"

using namespace pop;
using testutil::TempDir;
using testutil::words;
using testutil::write_file;

TEST_CASE("load_corpus counts jsonl records") {
  TempDir dir;
  write_file(dir.str("c.jsonl"),
             R"({"text": "alpha"})"
             "\n"
             R"({"text": "beta"})"
             "\n"
             R"({"text": "gamma"})"
             "\n");
  auto handle = load_corpus(dir.str("c.jsonl"), CorpusFormat::kJsonlField,
                            std::string("text"));
  CHECK(handle.record_count() == 3);
  CHECK(handle.record_text(0) == "alpha");
  CHECK(handle.record_text(2) == "gamma");
}

TEST_CASE("load_corpus on an empty file") {
  TempDir dir;
  write_file(dir.str("empty.jsonl"), "");
  auto handle = load_corpus(dir.str("empty.jsonl"), CorpusFormat::kJsonlField,
                            std::string("text"));
  CHECK(handle.record_count() == 0);
}

TEST_CASE("load_corpus over a directory of text files") {
  TempDir dir;
  auto sub = dir.path() / "corpus";
  std::filesystem::create_directory(sub);
  write_file((sub / "a.txt").string(), "first record");
  write_file((sub / "b.txt").string(), "second record");
  auto handle = load_corpus(sub.string(), CorpusFormat::kTextDir);
  CHECK(handle.record_count() == 2);
  CHECK(handle.record_text(0) == "first record");
}

TEST_CASE("load_corpus requires text_field for jsonl") {
  TempDir dir;
  write_file(dir.str("c.jsonl"), R"({"text": "x"})" "\n");
  CHECK_THROWS_AS(load_corpus(dir.str("c.jsonl"), CorpusFormat::kJsonlField),
                  std::invalid_argument);
}

TEST_CASE("malformed jsonl record: skipped when lenient, fatal when strict") {
  TempDir dir;
  write_file(dir.str("c.jsonl"),
             R"({"text": "ok"})"
             "\n"
             "{not json\n"
             R"({"text": "also ok"})"
             "\n");
  auto lenient = load_corpus(dir.str("c.jsonl"), CorpusFormat::kJsonlField,
                             std::string("text"), /*strict=*/false);
  CHECK(lenient.record_count() == 2);

  CHECK_THROWS_WITH_AS(load_corpus(dir.str("c.jsonl"), CorpusFormat::kJsonlField,
                                   std::string("text"), /*strict=*/true),
                       doctest::Contains("index 1"), std::runtime_error);
}

TEST_CASE("validate_and_truncate word gate") {
  SUBCASE("49 words rejected") {
    CHECK_FALSE(validate_and_truncate(words(49)).has_value());
  }
  SUBCASE("50 words accepted unchanged") {
    auto doc = validate_and_truncate(words(50));
    REQUIRE(doc.has_value());
    CHECK(doc->word_count == 50);
    CHECK(doc->text == words(50));
  }
  SUBCASE("1200 words truncated to 1024") {
    auto doc = validate_and_truncate(words(1200));
    REQUIRE(doc.has_value());
    CHECK(doc->word_count == 1024);
    CHECK(doc->text == words(1024));
  }
  SUBCASE("inner whitespace collapses to single spaces") {
    std::string messy = "a\t b\n\n c " + words(47, "x");
    auto doc = validate_and_truncate(messy);
    REQUIRE(doc.has_value());
    CHECK(doc->text.substr(0, 5) == "a b c");
  }
}

namespace {

// n records of 60 words each, one per line.
std::string make_plain_corpus(const TempDir& dir, std::size_t n) {
  std::ostringstream out;
  for (std::size_t i = 0; i < n; ++i)
    out << words(60, "r" + std::to_string(i) + "_") << "\n";
  std::string path = dir.str("plain.txt");
  write_file(path, out.str());
  return path;
}

}  // namespace

TEST_CASE("sample_documents draws the whole corpus when n equals its size") {
  TempDir dir;
  auto handle =
      load_corpus(make_plain_corpus(dir, 5), CorpusFormat::kPlainLines);
  auto first = sample_documents(handle, 5, 7);
  CHECK(first.documents.size() == 5);
  CHECK_FALSE(first.exhausted);

  auto second = sample_documents(handle, 5, 7);
  REQUIRE(second.documents.size() == 5);
  for (std::size_t i = 0; i < 5; ++i)
    CHECK(first.documents[i].id == second.documents[i].id);
}

TEST_CASE("sample_documents on an empty corpus reports exhaustion") {
  TempDir dir;
  write_file(dir.str("empty.txt"), "");
  auto handle = load_corpus(dir.str("empty.txt"), CorpusFormat::kPlainLines);
  auto result = sample_documents(handle, 3, 0);
  CHECK(result.documents.empty());
  CHECK(result.exhausted);
}

TEST_CASE("sample_documents is deterministic under a fixed seed") {
  TempDir dir;
  auto handle =
      load_corpus(make_plain_corpus(dir, 100), CorpusFormat::kPlainLines);
  auto a = sample_documents(handle, 10, 1);
  auto b = sample_documents(handle, 10, 1);
  REQUIRE(a.documents.size() == 10);
  for (std::size_t i = 0; i < 10; ++i)
    CHECK(a.documents[i].id == b.documents[i].id);
}

TEST_CASE("sampling properties: no duplicates, every doc within bounds") {
  TempDir dir;
  // Mix in short (invalid) records to exercise the skip-and-replace rule.
  std::ostringstream out;
  for (std::size_t i = 0; i < 40; ++i) {
    if (i % 4 == 0) out << words(10) << "\n";  // under the 50-word floor
    else out << words(55 + i, "r" + std::to_string(i) + "_") << "\n";
  }
  write_file(dir.str("mixed.txt"), out.str());
  auto handle = load_corpus(dir.str("mixed.txt"), CorpusFormat::kPlainLines);

  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    auto result = sample_documents(handle, 20, seed);
    CHECK(result.documents.size() == 20);
    std::set<std::string> ids;
    for (const auto& doc : result.documents) {
      CHECK(ids.insert(doc.id).second);
      CHECK(doc.word_count >= kMinDocumentWords);
      CHECK(doc.word_count <= kMaxDocumentWords);
      CHECK(word_count(doc.text) == doc.word_count);
    }
  }
}

TEST_CASE("invalid records are replaced, not counted against n") {
  TempDir dir;
  // 3 valid + 5 invalid records; asking for 3 must succeed.
  std::ostringstream out;
  out << words(50, "a") << "\n" << words(5) << "\n" << words(60, "b") << "\n"
      << words(3) << "\n" << words(7) << "\n" << words(70, "c") << "\n"
      << words(2) << "\n" << words(1) << "\n";
  write_file(dir.str("mixed.txt"), out.str());
  auto handle = load_corpus(dir.str("mixed.txt"), CorpusFormat::kPlainLines);
  auto result = sample_documents(handle, 3, 42);
  CHECK(result.documents.size() == 3);
  CHECK_FALSE(result.exhausted);

  auto too_many = sample_documents(handle, 4, 42);
  CHECK(too_many.documents.size() == 3);
  CHECK(too_many.exhausted);
}
