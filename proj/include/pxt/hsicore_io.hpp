/*
 * pxt - perfusion-shift spectral analysis and augmentation toolkit.
 *
 * File: include/pxt/hsicore_io.hpp
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

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pxt/hsicore.hpp"

namespace pxt {

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open for writing: " + path.string());
    return out;
}

inline std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open for reading: " + path.string());
    return in;
}

inline void put_u32(std::ostream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), 4);
}

inline std::uint32_t get_u32(std::istream& in) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    return v;
}

} // namespace detail

/// Writes `content` to `path` via a temporary file and rename, so readers
/// never observe a partially written file.
inline void atomic_write_text(const std::filesystem::path& path, const std::string& content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        auto out = detail::open_out(tmp);
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw io_error("short write: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

// Cube file `.hsc`: magic "HSC1", u32 LE width/height/channels(=100),
// u32 flags (bit 0 = l1_normalized), then f32 LE row-major channel-fastest.
inline void write_cube(const std::filesystem::path& path, const SpectralCube& cube) {
    auto out = detail::open_out(path);
    out.write("HSC1", 4);
    detail::put_u32(out, static_cast<std::uint32_t>(cube.width));
    detail::put_u32(out, static_cast<std::uint32_t>(cube.height));
    detail::put_u32(out, kChannels);
    detail::put_u32(out, cube.l1_normalized ? 1u : 0u);
    out.write(reinterpret_cast<const char*>(cube.data.data()),
              static_cast<std::streamsize>(cube.data.size() * sizeof(float)));
    if (!out) throw io_error("short write: " + path.string());
}

inline SpectralCube read_cube(const std::filesystem::path& path) {
    auto in = detail::open_in(path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "HSC1", 4) != 0)
        throw io_error("not a cube file (bad magic): " + path.string());
    const std::uint32_t w = detail::get_u32(in);
    const std::uint32_t h = detail::get_u32(in);
    const std::uint32_t channels = detail::get_u32(in);
    const std::uint32_t flags = detail::get_u32(in);
    if (channels != kChannels)
        throw io_error("unsupported channel count " + std::to_string(channels) + " in " +
                       path.string());
    if (w < 1 || h < 1) throw io_error("bad cube dimensions in " + path.string());
    SpectralCube cube(static_cast<int>(w), static_cast<int>(h));
    cube.l1_normalized = (flags & 1u) != 0;
    in.read(reinterpret_cast<char*>(cube.data.data()),
            static_cast<std::streamsize>(cube.data.size() * sizeof(float)));
    if (!in) throw io_error("truncated cube file: " + path.string());
    return cube;
}

// Mask file `.msk`: magic "MSK1", u32 LE width/height, u8 labels row-major.
inline void write_mask(const std::filesystem::path& path, const SegmentationMask& mask) {
    auto out = detail::open_out(path);
    out.write("MSK1", 4);
    detail::put_u32(out, static_cast<std::uint32_t>(mask.width));
    detail::put_u32(out, static_cast<std::uint32_t>(mask.height));
    out.write(reinterpret_cast<const char*>(mask.labels.data()),
              static_cast<std::streamsize>(mask.labels.size()));
    if (!out) throw io_error("short write: " + path.string());
}

inline SegmentationMask read_mask(const std::filesystem::path& path) {
    auto in = detail::open_in(path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "MSK1", 4) != 0)
        throw io_error("not a mask file (bad magic): " + path.string());
    const std::uint32_t w = detail::get_u32(in);
    const std::uint32_t h = detail::get_u32(in);
    if (w < 1 || h < 1) throw io_error("bad mask dimensions in " + path.string());
    SegmentationMask mask(static_cast<int>(w), static_cast<int>(h));
    in.read(reinterpret_cast<char*>(mask.labels.data()),
            static_cast<std::streamsize>(mask.labels.size()));
    if (!in) throw io_error("truncated mask file: " + path.string());
    return mask;
}

/// Organ class from a JSON value: either the numeric class id or the organ
/// name from the fixed palette.
inline int organ_class_from_json(const nlohmann::json& j) {
    if (j.is_number_integer()) {
        const int cls = j.get<int>();
        if (cls < 0 || cls >= kNumClasses)
            throw config_error("organ class id out of range: " + std::to_string(cls));
        return cls;
    }
    const std::string name = j.get<std::string>();
    for (int c = 0; c < kNumClasses; ++c)
        if (name == organ_name(c)) return c;
    throw config_error("unknown organ class: " + name);
}

inline nlohmann::json entry_to_json(const DatasetEntry& e) {
    nlohmann::json j{
        {"image_id", e.image_id},     {"subject_id", e.subject_id},
        {"species", to_string(e.species)}, {"perfusion", to_string(e.perfusion)},
        {"annotation", to_string(e.annotation)}, {"cube_path", e.cube_path},
        {"mask_path", e.mask_path},
    };
    if (e.angle) j["angle"] = to_string(*e.angle);
    return j;
}

inline DatasetEntry entry_from_json(const nlohmann::json& j) {
    DatasetEntry e;
    try {
        e.image_id = j.at("image_id").get<std::string>();
        e.subject_id = j.at("subject_id").get<std::string>();
        e.species = species_from_string(j.at("species").get<std::string>());
        e.perfusion = perfusion_from_string(j.at("perfusion").get<std::string>());
        e.annotation = annotation_from_string(j.at("annotation").get<std::string>());
        if (j.contains("angle") && !j["angle"].is_null())
            e.angle = angle_from_string(j["angle"].get<std::string>());
        e.cube_path = j.at("cube_path").get<std::string>();
        e.mask_path = j.at("mask_path").get<std::string>();
    } catch (const nlohmann::json::exception& ex) {
        throw config_error(std::string("malformed manifest entry: ") + ex.what());
    }
    return e;
}

inline void write_manifest(const std::filesystem::path& path, const DatasetIndex& index) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& e : index.entries) arr.push_back(entry_to_json(e));
    atomic_write_text(path, arr.dump(2) + "\n");
}

inline DatasetIndex read_manifest(const std::filesystem::path& path) {
    auto in = detail::open_in(path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& ex) {
        throw config_error("manifest is not valid JSON: " + path.string() + ": " + ex.what());
    }
    if (!j.is_array()) throw config_error("manifest must be a JSON array: " + path.string());
    DatasetIndex index;
    for (const auto& item : j) index.entries.push_back(entry_from_json(item));
    index.validate();
    return index;
}

/// Loads a cube/mask pair referenced by a manifest entry, resolving relative
/// paths against the manifest's directory.
inline std::pair<SpectralCube, SegmentationMask> load_pair(const DatasetEntry& e,
                                                           const std::filesystem::path& base_dir) {
    auto resolve = [&](const std::string& p) {
        std::filesystem::path fp(p);
        return fp.is_absolute() ? fp : base_dir / fp;
    };
    SpectralCube cube = read_cube(resolve(e.cube_path));
    SegmentationMask mask = read_mask(resolve(e.mask_path));
    require_paired(cube, mask);
    return {std::move(cube), std::move(mask)};
}

} // namespace pxt
