#include "uedsr/errors.hpp"

namespace uedsr {

IntegrityError::IntegrityError(const std::string& path, const std::string& what)
    : Error(path + ": " + what), path_(path) {}

}  // namespace uedsr
