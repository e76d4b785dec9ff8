#ifndef CORAL_ERROR_HPP
#define CORAL_ERROR_HPP

#include <stdexcept>
#include <string>

namespace coral {

enum class ErrorKind {
  usage = 1,    // bad arguments, malformed config
  data = 2,     // missing or inconsistent files, datasets too small
  numeric = 3,  // non-finite values where finite ones are required
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void throw_usage(const std::string& msg) {
  throw Error(ErrorKind::usage, msg);
}
[[noreturn]] inline void throw_data(const std::string& msg) {
  throw Error(ErrorKind::data, msg);
}
[[noreturn]] inline void throw_numeric(const std::string& msg) {
  throw Error(ErrorKind::numeric, msg);
}

}  // namespace coral

#endif
