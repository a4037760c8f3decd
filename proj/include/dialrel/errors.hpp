#pragma once

#include <stdexcept>
#include <string>

namespace dialrel {

// Input files or records that violate a declared contract.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dialrel
