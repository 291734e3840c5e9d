#include "motiongait/error.hpp"

namespace motiongait {

std::string_view error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Dimension: return "dimension_error";
    case ErrorKind::Domain: return "domain_error";
    case ErrorKind::Config: return "config_error";
    case ErrorKind::Contract: return "contract_error";
    case ErrorKind::Ingestion: return "ingestion_error";
    case ErrorKind::Numeric: return "numeric_abort";
    case ErrorKind::Io: return "io_error";
  }
  return "error";
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config: return 2;
    case ErrorKind::Ingestion: return 3;
    case ErrorKind::Numeric: return 4;
    case ErrorKind::Io: return 5;
    // Programming/shape errors surface as configuration problems at the CLI.
    case ErrorKind::Dimension:
    case ErrorKind::Domain:
    case ErrorKind::Contract: return 2;
  }
  return 1;
}

}  // namespace motiongait
