#include "repspace/error.hpp"

namespace repspace {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::io: return "io";
        case ErrorKind::format: return "format";
        case ErrorKind::invariant: return "invariant";
        case ErrorKind::dimension: return "dimension";
        case ErrorKind::degenerate: return "degenerate";
        case ErrorKind::undefined: return "undefined";
        case ErrorKind::divergence: return "divergence";
        case ErrorKind::usage: return "usage";
    }
    return "unknown";
}

}  // namespace repspace
