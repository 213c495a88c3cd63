#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace clseq {

template <class... Parts>
std::string cat(Parts&&... parts) {
    std::ostringstream os;
    (os << ... << parts);
    return os.str();
}

[[noreturn]] inline void fail(const std::string& msg) {
    throw std::runtime_error(msg);
}

inline void check(bool ok, const std::string& msg) {
    if (!ok) fail(msg);
}

}  // namespace clseq
