/*
 * pxt - perfusion-shift spectral analysis and augmentation toolkit.
 *
 * File: include/pxt/common.hpp
 *
 * Copyright 2026 The pxt authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace pxt {

inline constexpr const char* kToolVersion = "0.1.0";

/// Number of spectral channels per pixel. Channel c samples 500 + 5*c nm.
inline constexpr int kChannels = 100;

/// Wavelength (nm) of spectral channel c.
inline constexpr double wavelength_nm(int c) { return 500.0 + 5.0 * c; }

/// Channel index of a wavelength on the fixed 500..995 nm grid (must be exact).
inline constexpr int channel_of_nm(int nm) { return (nm - 500) / 5; }

/// Fixed 12-class palette: background plus 11 organs.
inline constexpr int kNumClasses = 12;

/// Mask sentinel for pixels excluded from all losses and metrics.
inline constexpr std::uint8_t kIgnoreLabel = 255;

enum class OrganClass : std::uint8_t {
    Background = 0,
    Stomach = 1,
    SmallBowel = 2,
    Colon = 3,
    Liver = 4,
    Pancreas = 5,
    Kidney = 6,
    Spleen = 7,
    Omentum = 8,
    Lung = 9,
    Skin = 10,
    Peritoneum = 11,
};

inline const char* organ_name(int cls) {
    static constexpr const char* names[kNumClasses] = {
        "background", "stomach", "small_bowel", "colon",  "liver", "pancreas",
        "kidney",     "spleen",  "omentum",     "lung",   "skin",  "peritoneum",
    };
    if (cls < 0 || cls >= kNumClasses) throw std::out_of_range("organ class id out of range");
    return names[cls];
}

/// Raised for malformed configuration input. CLI exit code 2.
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Raised for missing or unreadable/unwritable files. CLI exit code 3.
struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Raised when a numerical procedure fails (divergence, degenerate input). CLI exit code 4.
struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// All binary file formats are little-endian and written with raw stores.
static_assert(std::endian::native == std::endian::little,
              "pxt binary file formats require a little-endian host");

/// Shortest decimal form that round-trips the exact double value.
inline std::string format_double(double v) {
    std::array<char, 32> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc()) throw numeric_error("double formatting failed");
    return std::string(buf.data(), ptr);
}

inline std::string format_float(float v) {
    std::array<char, 32> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc()) throw numeric_error("float formatting failed");
    return std::string(buf.data(), ptr);
}

} // namespace pxt
