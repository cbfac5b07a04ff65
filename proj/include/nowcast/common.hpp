#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <sstream>
#include <stdexcept>
#include <string>

namespace nowcast {

// Error taxonomy. The CLI maps these onto exit codes:
// ConfigError/DimensionError -> 2, DataError -> 3, NumericError -> 4.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
// API misuse (backward on a non-scalar, stepping a parameter without a
// gradient, ...). These indicate bugs in the caller, not bad user input.
struct ContractError : std::logic_error {
    using std::logic_error::logic_error;
};

// Extents of a dense tensor, 0 to 4 dimensions.
class Shape {
public:
    Shape() = default;
    Shape(std::initializer_list<std::int64_t> dims) {
        if (dims.size() > kMaxDims)
            throw DimensionError("shape has more than 4 dimensions");
        for (std::int64_t d : dims) dims_[ndim_++] = d;
    }

    int ndim() const { return ndim_; }

    std::int64_t operator[](int i) const { return dims_[static_cast<std::size_t>(i)]; }

    std::int64_t numel() const {
        std::int64_t n = 1;
        for (int i = 0; i < ndim_; ++i) n *= dims_[static_cast<std::size_t>(i)];
        return ndim_ == 0 ? 0 : n;
    }

    bool operator==(const Shape& o) const {
        if (ndim_ != o.ndim_) return false;
        for (int i = 0; i < ndim_; ++i)
            if (dims_[static_cast<std::size_t>(i)] != o.dims_[static_cast<std::size_t>(i)]) return false;
        return true;
    }
    bool operator!=(const Shape& o) const { return !(*this == o); }

    std::string str() const {
        std::ostringstream os;
        os << '(';
        for (int i = 0; i < ndim_; ++i) {
            if (i) os << ", ";
            os << dims_[static_cast<std::size_t>(i)];
        }
        os << ')';
        return os.str();
    }

private:
    static constexpr std::size_t kMaxDims = 4;
    std::array<std::int64_t, kMaxDims> dims_{1, 1, 1, 1};
    int ndim_ = 0;
};

inline void check_dim(bool ok, const std::string& msg) {
    if (!ok) throw DimensionError(msg);
}
inline void check_config(bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
}
inline void check_contract(bool ok, const std::string& msg) {
    if (!ok) throw ContractError(msg);
}

}  // namespace nowcast
