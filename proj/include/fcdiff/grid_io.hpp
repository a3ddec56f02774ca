/*
Copyright 2026 The fcdiff Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS-IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

#pragma once

#include <filesystem>
#include <string>

#include "fcdiff/grid.hpp"

namespace fcdiff {

// FDG1 binary layout: magic "FDG1", u32 LE height, width, channels, then
// height*width*channels IEEE-754 binary64 LE values (row-major, channel
// interleaved). No padding, no trailer.
std::string encode_grid(const Grid& g);
Grid decode_grid(const std::string& bytes);

void write_grid(const std::filesystem::path& path, const Grid& g);
Grid read_grid(const std::filesystem::path& path);

// 8-bit PNM preview. Values map linearly [0,1] -> [0,255] with clamping.
// Three-channel grids become P6; anything else writes channel 0 as P5.
std::string encode_pnm(const Grid& g);
void write_pnm(const std::filesystem::path& path, const Grid& g);

// Reads binary P5/P6 (maxval <= 255) back into [0,1].
Grid read_pnm(const std::filesystem::path& path);

// Loads by extension: .pgm/.ppm via read_pnm, anything else as FDG1.
Grid load_image(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

}  // namespace fcdiff
