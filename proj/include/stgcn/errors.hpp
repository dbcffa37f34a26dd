#pragma once

#include <stdexcept>
#include <string>

namespace stgcn {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IndexError : public Error { public: using Error::Error; };
class ConfigError : public Error { public: using Error::Error; };
class ParseError : public Error { public: using Error::Error; };
class FormatError : public Error { public: using Error::Error; };
class InputError : public Error { public: using Error::Error; };
class DimensionError : public Error { public: using Error::Error; };
class IoError : public Error { public: using Error::Error; };
class InternalError : public Error { public: using Error::Error; };

}  // namespace stgcn
