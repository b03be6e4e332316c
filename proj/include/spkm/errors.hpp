#pragma once

#include <stdexcept>
#include <string>

namespace spkm {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TripleShortfall : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class HeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace spkm
