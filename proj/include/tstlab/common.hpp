#pragma once

#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tstlab {

// Label value that every loss skips. Matches the usual ignore_index convention.
inline constexpr int32_t kIgnoreIndex = -100;

struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

struct ContractError : std::logic_error {
    explicit ContractError(const std::string& what) : std::logic_error(what) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct DataError : std::runtime_error {
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

using Shape = std::vector<int64_t>;

inline int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int64_t d : s) {
        if (d < 0) throw ShapeError("negative dimension in shape");
        n *= d;
    }
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

// Integer tensor for token ids, labels and masks. Not differentiable, so it
// stays outside the autodiff graph entirely.
struct IntTensor {
    Shape shape;
    std::vector<int32_t> data;

    IntTensor() = default;
    explicit IntTensor(Shape s) : shape(std::move(s)), data(shape_numel(shape)) {}
    IntTensor(Shape s, std::vector<int32_t> values) : shape(std::move(s)), data(std::move(values)) {
        if ((int64_t)data.size() != shape_numel(shape))
            throw ShapeError("IntTensor: value count does not match shape " + shape_str(shape));
    }

    int64_t size() const { return (int64_t)data.size(); }
    int ndim() const { return (int)shape.size(); }
    int64_t dim(int i) const { return shape.at(i); }

    IntTensor reshaped(Shape s) const {
        if (shape_numel(s) != size())
            throw ShapeError("IntTensor reshape " + shape_str(shape) + " -> " + shape_str(s));
        return IntTensor(std::move(s), data);
    }
};

enum class Phase { superposition, recovery };

inline const char* phase_name(Phase p) {
    return p == Phase::superposition ? "superposition" : "recovery";
}

enum class Precision { single_fp, double_fp };

inline const char* precision_name(Precision p) {
    return p == Precision::single_fp ? "single" : "double";
}

}  // namespace tstlab
