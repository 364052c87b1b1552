/// @file common.hpp
/// @brief Shared numeric types, the library exception, and the warning sink.
#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <functional>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace mscontinua {

using Vector = Eigen::VectorXd;
using DenseMatrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

/// Every failure raised by the library. The message carries the context
/// (element index, patch index, file line, ...) needed to locate the problem.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

template <typename... Args>
[[nodiscard]] std::string concat(Args&&... args) {
    std::ostringstream os;
    (os << ... << std::forward<Args>(args));
    return os.str();
}

template <typename... Args>
[[noreturn]] void fail(Args&&... args) {
    throw Error(concat(std::forward<Args>(args)...));
}

using WarningSink = std::function<void(std::string_view)>;

inline WarningSink& warning_sink() {
    static WarningSink sink = [](std::string_view msg) { std::clog << "warning: " << msg << '\n'; };
    return sink;
}

/// Replace the process-wide warning handler; returns the previous one.
inline WarningSink set_warning_sink(WarningSink sink) {
    return std::exchange(warning_sink(), std::move(sink));
}

template <typename... Args>
void warn(Args&&... args) {
    if (const auto& sink = warning_sink())
        sink(concat(std::forward<Args>(args)...));
}

} // namespace mscontinua
