#pragma once

#include <stdexcept>
#include <string>

namespace cosy {

// Base of every error the library raises. Each subclass corresponds to one
// failure kind so callers can catch precisely what they can handle.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define COSY_DEFINE_ERROR(Name)              \
  class Name : public Error {                \
   public:                                   \
    explicit Name(const std::string& what)   \
        : Error(#Name ": " + what) {}        \
  }

// geometry
COSY_DEFINE_ERROR(BehindCamera);
COSY_DEFINE_ERROR(DegenerateBasis);
// symmetry
COSY_DEFINE_ERROR(GroupTooLarge);
// scene-io
COSY_DEFINE_ERROR(ParseError);
COSY_DEFINE_ERROR(SchemaError);
COSY_DEFINE_ERROR(InvariantError);
COSY_DEFINE_ERROR(UnknownLabel);
COSY_DEFINE_ERROR(UnknownView);
// matching
COSY_DEFINE_ERROR(DegeneratePairs);

#undef COSY_DEFINE_ERROR

}  // namespace cosy
