// SPDX-License-Identifier: Apache-2.0

#include "urae/error.hpp"

namespace urae {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Shape: return "shape";
    case ErrorKind::Rank: return "rank";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Contract: return "contract";
    case ErrorKind::Regime: return "regime";
    case ErrorKind::Numerical: return "numerical";
    case ErrorKind::Divergence: return "divergence";
    case ErrorKind::Validation: return "validation";
    case ErrorKind::Format: return "format";
    case ErrorKind::Corruption: return "corruption";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

}  // namespace urae
