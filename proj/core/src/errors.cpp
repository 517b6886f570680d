#include "drank/errors.hpp"

namespace drank {

int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::validation:
      return 2;
    case ErrorKind::accuracy:
      return 3;
    case ErrorKind::convergence:
      return 4;
  }
  return 1;
}

}  // namespace drank
