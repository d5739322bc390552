#pragma once

#include <stdexcept>
#include <string>

namespace fastext {

// Tensor/weight shapes that do not line up. The message names the layer.
class shape_error : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Malformed on-disk data: weight files, images, ground-truth lines.
class format_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// File could not be opened, read or written.
class io_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace fastext
