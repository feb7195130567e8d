#pragma once

#include <stdexcept>
#include <string>

namespace ttsim {

// Bad argument to a public operation (negative count, out-of-range prior, ...).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Tree shape violated: expanding a terminal or already-expanded node.
class StructuralError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Visit / in-flight bookkeeping would go inconsistent. Always a bug signal.
class AccountingError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Every reachable leaf is terminal; the caller treats the tree as exhausted.
class NoExpandableLeaf : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Negative exit requested under an aggregation scheme without the leaf bound.
class UnsupportedScheme : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

// Event ordering regression or runaway run.
class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ttsim
