#pragma once

#include <stdexcept>
#include <string>

namespace morpes {

// Root of every error raised by the library. `kind()` is a stable name used
// in HTTP error bodies and CLI diagnostics.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define MORPES_DEFINE_ERROR(Name)                                      \
  class Name : public Error {                                          \
   public:                                                             \
    explicit Name(const std::string& message) : Error(#Name, message) {} \
  }

// segmenter
MORPES_DEFINE_ERROR(InvalidUrlError);
MORPES_DEFINE_ERROR(ContentTypeError);
MORPES_DEFINE_ERROR(TimeoutError);
MORPES_DEFINE_ERROR(EmptyPageError);

// profile
MORPES_DEFINE_ERROR(InvalidUserError);
MORPES_DEFINE_ERROR(InvalidEventError);
MORPES_DEFINE_ERROR(EventMismatchError);
MORPES_DEFINE_ERROR(NotFoundError);
MORPES_DEFINE_ERROR(StoreError);

// composer
MORPES_DEFINE_ERROR(TemplateNotFoundError);
MORPES_DEFINE_ERROR(NoMoreShotsError);
MORPES_DEFINE_ERROR(RenderError);

// metrics
MORPES_DEFINE_ERROR(EmptyGroupError);
MORPES_DEFINE_ERROR(ParseError);

// service
MORPES_DEFINE_ERROR(ConfigError);
MORPES_DEFINE_ERROR(StartupError);

#undef MORPES_DEFINE_ERROR

// Upstream fetch failure. `status()` is the HTTP status when the origin
// answered with a non-success code, 0 for transport failures.
class FetchError : public Error {
 public:
  FetchError(int status, const std::string& reason)
      : Error("FetchError", reason), status_(status) {}

  int status() const noexcept { return status_; }

 private:
  int status_;
};

}  // namespace morpes
