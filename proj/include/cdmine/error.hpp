#pragma once

#include <stdexcept>
#include <string>

namespace cdmine {

// Numeric values are part of the C ABI (see cdmine.h); append only.
enum class Errc : int {
  ok = 0,
  invalid_argument = 1,
  input = 2,
  schema = 3,
  row = 4,
  config = 5,
  contract = 6,
  degenerate_range = 7,
  binning = 8,
  training = 9,
  prediction = 10,
  context = 11,
  state = 12,
  sync = 13,
  run = 14,
  metric = 15,
  io = 16,
  internal = 17,
};

const char* errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace cdmine
