// Copyright 2026 The Propflow Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "propflow/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace propflow {

RasterImage RasterImage::make(uint32_t w, uint32_t h, uint32_t c, uint8_t fill) {
    RasterImage img;
    img.width = w;
    img.height = h;
    img.channels = c;
    img.pixels.assign(static_cast<std::size_t>(w) * h * c, fill);
    return img;
}

namespace {

// Reads one PNM header token, skipping whitespace and '#' comments.
std::string next_token(std::istream& in, const std::string& path) {
    std::string tok;
    int ch = in.get();
    while (ch != EOF) {
        if (ch == '#') {
            while (ch != EOF && ch != '\n') ch = in.get();
        } else if (std::isspace(ch)) {
            ch = in.get();
        } else {
            break;
        }
    }
    while (ch != EOF && !std::isspace(ch)) {
        tok.push_back(static_cast<char>(ch));
        ch = in.get();
    }
    if (tok.empty()) fail("FormatError", path + ": truncated PNM header");
    return tok;
}

} // namespace

RasterImage read_pnm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("IoError", "cannot open image '" + path + "'");

    const std::string magic = next_token(in, path);
    uint32_t channels = 0;
    if (magic == "P5") channels = 1;
    else if (magic == "P6") channels = 3;
    else fail("FormatError", path + ": expected P5 or P6, got '" + magic + "'");

    const long w = std::stol(next_token(in, path));
    const long h = std::stol(next_token(in, path));
    const long maxval = std::stol(next_token(in, path));
    if (w <= 0 || h <= 0) fail("FormatError", path + ": non-positive dimensions");
    if (maxval != 255) fail("FormatError", path + ": only 8-bit maxval 255 supported");

    RasterImage img = RasterImage::make(static_cast<uint32_t>(w),
                                        static_cast<uint32_t>(h), channels);
    in.read(reinterpret_cast<char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.pixels.size()))
        fail("FormatError", path + ": truncated pixel data");
    return img;
}

void write_pnm(const RasterImage& img, const std::string& path) {
    if (img.channels != 1 && img.channels != 3)
        fail("FormatError", "PNM supports 1 or 3 channels");
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("IoError", "cannot write image '" + path + "'");
    out << (img.channels == 1 ? "P5" : "P6") << "\n"
        << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.pixels.data()),
              static_cast<std::streamsize>(img.pixels.size()));
    if (!out) fail("IoError", "short write to '" + path + "'");
}

std::vector<double> to_luminance(const RasterImage& img) {
    std::vector<double> lum(static_cast<std::size_t>(img.width) * img.height);
    if (img.channels == 1) {
        for (std::size_t i = 0; i < lum.size(); ++i) lum[i] = img.pixels[i];
    } else {
        for (std::size_t i = 0; i < lum.size(); ++i) {
            const uint8_t* p = &img.pixels[i * img.channels];
            lum[i] = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
        }
    }
    return lum;
}

double bilinear_sample(const std::vector<double>& plane, uint32_t width,
                       uint32_t height, double x, double y) {
    x = std::clamp(x, 0.0, static_cast<double>(width - 1));
    y = std::clamp(y, 0.0, static_cast<double>(height - 1));
    const auto x0 = static_cast<uint32_t>(x);
    const auto y0 = static_cast<uint32_t>(y);
    const uint32_t x1 = std::min(x0 + 1, width - 1);
    const uint32_t y1 = std::min(y0 + 1, height - 1);
    const double fx = x - x0;
    const double fy = y - y0;
    const double top = plane[static_cast<std::size_t>(y0) * width + x0] * (1.0 - fx) +
                       plane[static_cast<std::size_t>(y0) * width + x1] * fx;
    const double bot = plane[static_cast<std::size_t>(y1) * width + x0] * (1.0 - fx) +
                       plane[static_cast<std::size_t>(y1) * width + x1] * fx;
    return top * (1.0 - fy) + bot * fy;
}

double bilinear_sample_u8(const RasterImage& img, uint32_t channel, double x, double y) {
    x = std::clamp(x, 0.0, static_cast<double>(img.width - 1));
    y = std::clamp(y, 0.0, static_cast<double>(img.height - 1));
    const auto x0 = static_cast<uint32_t>(x);
    const auto y0 = static_cast<uint32_t>(y);
    const uint32_t x1 = std::min(x0 + 1, img.width - 1);
    const uint32_t y1 = std::min(y0 + 1, img.height - 1);
    const double fx = x - x0;
    const double fy = y - y0;
    const double top = img.at(x0, y0, channel) * (1.0 - fx) + img.at(x1, y0, channel) * fx;
    const double bot = img.at(x0, y1, channel) * (1.0 - fx) + img.at(x1, y1, channel) * fx;
    return top * (1.0 - fy) + bot * fy;
}

} // namespace propflow
