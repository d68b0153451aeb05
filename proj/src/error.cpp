#include "cdmine/error.hpp"

namespace cdmine {

const char* errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::ok: return "ok";
    case Errc::invalid_argument: return "invalid argument";
    case Errc::input: return "input error";
    case Errc::schema: return "schema error";
    case Errc::row: return "row error";
    case Errc::config: return "config error";
    case Errc::contract: return "contract violation";
    case Errc::degenerate_range: return "degenerate range";
    case Errc::binning: return "binning error";
    case Errc::training: return "training error";
    case Errc::prediction: return "prediction error";
    case Errc::context: return "context error";
    case Errc::state: return "state error";
    case Errc::sync: return "sync error";
    case Errc::run: return "run error";
    case Errc::metric: return "metric error";
    case Errc::io: return "i/o error";
    case Errc::internal: return "internal error";
  }
  return "unknown error";
}

}  // namespace cdmine
