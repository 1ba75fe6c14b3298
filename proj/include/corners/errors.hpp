#pragma once

#include <stdexcept>
#include <string>

namespace corners {

// Error taxonomy, mirrored by the CLI exit codes:
// validation/domain -> 1, resource/cap -> 2, internal invariant -> 3.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ResourceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InternalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace corners
