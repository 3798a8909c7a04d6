#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace relabel {

// Error categories map 1:1 onto CLI exit codes (config=2, data=3, stage=4).
enum class ErrorCategory { Config, Data, Stage };

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, std::string message)
        : std::runtime_error(std::move(message)), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

inline const char* category_name(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::Config: return "config";
        case ErrorCategory::Data: return "data";
        case ErrorCategory::Stage: return "stage";
    }
    return "unknown";
}

[[noreturn]] inline void throw_config(std::string message) {
    throw Error(ErrorCategory::Config, std::move(message));
}

[[noreturn]] inline void throw_data(std::string message) {
    throw Error(ErrorCategory::Data, std::move(message));
}

[[noreturn]] inline void throw_stage(std::string message) {
    throw Error(ErrorCategory::Stage, std::move(message));
}

}  // namespace relabel
