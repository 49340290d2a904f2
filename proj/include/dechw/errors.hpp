#pragma once

#include <stdexcept>
#include <string>

namespace dechw {

// Failure classes map to distinct CLI exit codes; see tools/dechw_main.cpp.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid or inconsistent run description (bad key, out-of-range value, ...).
struct ConfigError : Error {
  using Error::Error;
};

// Malformed or inconsistent input data (labels out of range, bad IDX file, ...).
struct DataError : Error {
  using Error::Error;
};

// File ingestion failure; message names the offending file.
struct IngestError : DataError {
  using DataError::DataError;
};

// Mismatched array lengths or tensor shapes.
struct DimensionError : Error {
  using Error::Error;
};

// Out-of-range node or sample id.
struct IndexError : Error {
  using Error::Error;
};

// A message is missing a payload the selected strategy requires.
struct ProtocolError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace dechw
