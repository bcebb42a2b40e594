#include "nfi/error.hpp"

namespace nfi {

int exit_code_for(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::io:
    case ErrorKind::format:
        return 1;
    case ErrorKind::contract:
    case ErrorKind::degenerate:
        return 2;
    }
    return 1;
}

} // namespace nfi
