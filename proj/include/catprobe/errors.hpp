#pragma once

#include <stdexcept>
#include <string>

namespace catprobe {

// Base of every error raised by the toolkit. Subclasses name the failure
// kind so callers (and the CLI) can decide between "skip sample" and "abort".
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define CATPROBE_DEFINE_ERROR(Name)         \
  class Name : public Error {               \
   public:                                  \
    using Error::Error;                     \
  }

CATPROBE_DEFINE_ERROR(UnsupportedLanguage);
CATPROBE_DEFINE_ERROR(SyntaxError);
CATPROBE_DEFINE_ERROR(FormatError);
CATPROBE_DEFINE_ERROR(ShapeError);
CATPROBE_DEFINE_ERROR(RangeError);
CATPROBE_DEFINE_ERROR(AlignmentError);
CATPROBE_DEFINE_ERROR(EmptyInput);
CATPROBE_DEFINE_ERROR(TypeAbsent);
CATPROBE_DEFINE_ERROR(EmptySelection);
CATPROBE_DEFINE_ERROR(ShapeMismatch);
CATPROBE_DEFINE_ERROR(EmptyUnion);
CATPROBE_DEFINE_ERROR(UnknownSample);

#undef CATPROBE_DEFINE_ERROR

}  // namespace catprobe
