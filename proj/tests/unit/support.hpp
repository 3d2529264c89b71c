#pragma once

#include <doctest.h>

#include <filesystem>
#include <string>

#include "kneescout/error.hpp"

namespace support {

template <class Fn>
kneescout::ErrorCode code_of(Fn&& fn) {
    try {
        fn();
    } catch (const kneescout::Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return kneescout::ErrorCode::InvalidArgument;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
    auto d = std::filesystem::temp_directory_path() / ("kneescout_test_" + name);
    std::filesystem::remove_all(d);
    std::filesystem::create_directories(d);
    return d;
}

}  // namespace support
