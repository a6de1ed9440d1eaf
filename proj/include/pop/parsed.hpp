#pragma once

#include <cassert>
#include <string>
#include <utility>

namespace pop {

/// Result of parsing a model completion: either a value, or a failure that
/// keeps the offending raw text around for logging.
template <typename T>
class Parsed {
 public:
  static Parsed success(T value) {
    Parsed p;
    p.ok_ = true;
    p.value_ = std::move(value);
    return p;
  }

  static Parsed failure(std::string reason, std::string raw = {}) {
    Parsed p;
    p.ok_ = false;
    p.reason_ = std::move(reason);
    p.raw_ = std::move(raw);
    return p;
  }

  bool ok() const { return ok_; }
  explicit operator bool() const { return ok_; }

  const T& value() const {
    assert(ok_);
    return value_;
  }
  T& value() {
    assert(ok_);
    return value_;
  }

  const std::string& reason() const { return reason_; }
  const std::string& raw() const { return raw_; }

 private:
  Parsed() = default;
  bool ok_ = false;
  T value_{};
  std::string reason_;
  std::string raw_;
};

}  // namespace pop
