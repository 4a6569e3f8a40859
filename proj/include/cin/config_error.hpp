#pragma once

#include <stdexcept>
#include <string>

namespace cin {

/// Invalid input document. `location` is a JSON pointer or "file:line:column".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string location, std::string message)
      : std::runtime_error(location.empty() ? message : location + ": " + message),
        location_(std::move(location)),
        message_(std::move(message)) {}

  const std::string& location() const { return location_; }
  const std::string& message() const { return message_; }

 private:
  std::string location_;
  std::string message_;
};

}  // namespace cin
