#pragma once

#include <stdexcept>
#include <string>

namespace qtokens {

/// Raised for every contract violation in the toolkit; the message is meant
/// to be shown to the user verbatim.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace qtokens
