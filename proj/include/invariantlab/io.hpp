#pragma once

// On-disk artifact formats.
//
//   Cloud CSV     2k real columns re_1, im_1, ..., re_k, im_k; '#' header
//                 comments carry k and the resolution.  Values are printed
//                 with %.17g, so reading a written file reproduces every
//                 double bit-for-bit.
//   Escape PGM    binary P5 render of a two-axis escape field: bounded
//                 samples are black, escaped ones fade from white (instant
//                 escape) toward dark gray (late escape).
//   Overlay PPM   binary P6 on the same two-axis frame: an optional escape
//                 field as the gray background, with colored dots at marked
//                 points.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "invariantlab/compact.hpp"
#include "invariantlab/escape.hpp"

namespace invariantlab {

inline constexpr const char* kVersionString = "0.1.0";

// ---------------------------------------------------------------------------
// File helpers (binary mode both ways, so image bytes survive untouched)
// ---------------------------------------------------------------------------

inline void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ComputationError("cannot open for writing: " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ComputationError("write failed: " + path);
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ComputationError("cannot open for reading: " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return bytes;
}

// ---------------------------------------------------------------------------
// Cloud CSV
// ---------------------------------------------------------------------------

namespace detail {

inline void append_g17(std::string& out, double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    out += buf;
}

// Full-consumption double parse; returns false on trailing garbage.
inline bool parse_double_exact(const std::string& s, double& out) {
    if (s.empty()) return false;
    const char* begin = s.c_str();
    char* end = nullptr;
    out = std::strtod(begin, &end);
    return end == begin + s.size();
}

inline std::vector<std::string> split_on(const std::string& line, char sep) {
    std::vector<std::string> parts;
    size_t start = 0;
    while (true) {
        size_t pos = line.find(sep, start);
        if (pos == std::string::npos) {
            parts.push_back(line.substr(start));
            break;
        }
        parts.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    for (std::string& p : parts) {
        size_t a = p.find_first_not_of(" \t\r");
        size_t b = p.find_last_not_of(" \t\r");
        p = (a == std::string::npos) ? std::string() : p.substr(a, b - a + 1);
    }
    return parts;
}

}  // namespace detail

inline std::string cloud_to_csv(const CompactCloud& cloud) {
    if (cloud.k < 1) throw InvalidInputError("cloud_to_csv: cloud has no dimension");
    std::string out;
    out.reserve(static_cast<size_t>(cloud.size()) * static_cast<size_t>(cloud.k) * 24 + 128);
    out += "# k=" + std::to_string(cloud.k) + "\n";
    out += "# resolution=";
    detail::append_g17(out, cloud.resolution);
    out += "\n# columns=";
    for (int j = 1; j <= cloud.k; ++j) {
        if (j > 1) out += ",";
        out += "re_" + std::to_string(j) + ",im_" + std::to_string(j);
    }
    out += "\n";
    for (int64_t i = 0; i < cloud.size(); ++i) {
        for (int j = 0; j < cloud.k; ++j) {
            const cplx& v = cloud.data[static_cast<size_t>(i * cloud.k + j)];
            if (j > 0) out += ",";
            detail::append_g17(out, v.real());
            out += ",";
            detail::append_g17(out, v.imag());
        }
        out += "\n";
    }
    return out;
}

inline CompactCloud cloud_from_csv(const std::string& text) {
    CompactCloud cloud;
    bool have_k = false, have_res = false;
    int lineno = 0;
    size_t start = 0;
    auto fail = [&](const std::string& msg) {
        throw InvalidInputError("cloud csv line " + std::to_string(lineno) + ": " + msg);
    };
    while (start < text.size()) {
        ++lineno;
        size_t nl = text.find('\n', start);
        std::string line = text.substr(start, nl == std::string::npos ? std::string::npos
                                                                      : nl - start);
        start = (nl == std::string::npos) ? text.size() : nl + 1;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::string body = line.substr(1);
            size_t a = body.find_first_not_of(" \t");
            if (a != std::string::npos) body = body.substr(a);
            if (body.rfind("k=", 0) == 0) {
                int k = std::atoi(body.c_str() + 2);
                if (k < 1 || k > kMaxDim) fail("bad k header: " + body);
                cloud.k = k;
                have_k = true;
            } else if (body.rfind("resolution=", 0) == 0) {
                double r;
                if (!detail::parse_double_exact(body.substr(11), r) || !(r >= 0))
                    fail("bad resolution header: " + body);
                cloud.resolution = r;
                have_res = true;
            }
            continue;  // other comments (columns=..., notes) carry no data
        }
        if (!have_k) fail("data before the '# k=' header");
        std::vector<std::string> cols = detail::split_on(line, ',');
        if (static_cast<int>(cols.size()) != 2 * cloud.k)
            fail("expected " + std::to_string(2 * cloud.k) + " columns, got " +
                 std::to_string(cols.size()));
        for (int j = 0; j < cloud.k; ++j) {
            double re, im;
            if (!detail::parse_double_exact(cols[static_cast<size_t>(2 * j)], re))
                fail("bad real value '" + cols[static_cast<size_t>(2 * j)] + "'");
            if (!detail::parse_double_exact(cols[static_cast<size_t>(2 * j + 1)], im))
                fail("bad imaginary value '" + cols[static_cast<size_t>(2 * j + 1)] + "'");
            cloud.data.emplace_back(re, im);
        }
    }
    lineno = 0;
    if (!have_k) fail("missing '# k=' header");
    if (!have_res) fail("missing '# resolution=' header");
    return cloud;
}

inline void write_cloud_csv(const std::string& path, const CompactCloud& cloud) {
    write_file(path, cloud_to_csv(cloud));
}

inline CompactCloud read_cloud_csv(const std::string& path) {
    return cloud_from_csv(read_file(path));
}

inline bool clouds_identical(const CompactCloud& a, const CompactCloud& b) {
    return a.k == b.k && a.resolution == b.resolution && a.data == b.data;
}

// ---------------------------------------------------------------------------
// Two-axis image frames
// ---------------------------------------------------------------------------

namespace detail {

struct ImageFrame {
    int axis_x = -1, axis_y = -1;  // real-axis indices into the grid
    int64_t width = 0, height = 0;
    int64_t stride_x = 0, stride_y = 0;  // sample index = x*stride_x + y*stride_y
};

// The frame of a grid with exactly two free axes: the first free axis runs
// left-to-right, the second bottom-to-top (row 0 of the image is the top).
inline ImageFrame image_frame(const GridSpec& g) {
    ImageFrame fr;
    int64_t stride = 1;
    for (int a = 0; a < 2 * g.k; ++a) {
        size_t s = static_cast<size_t>(a);
        if (g.sliced[s]) continue;
        if (fr.axis_x < 0) {
            fr.axis_x = a;
            fr.width = g.counts[s];
            fr.stride_x = stride;
        } else if (fr.axis_y < 0) {
            fr.axis_y = a;
            fr.height = g.counts[s];
            fr.stride_y = stride;
        } else {
            throw InvalidInputError("image rendering needs a grid with exactly 2 free axes");
        }
        stride *= g.counts[s];
    }
    if (fr.axis_y < 0)
        throw InvalidInputError("image rendering needs a grid with exactly 2 free axes");
    return fr;
}

// Gray level for one sample: bounded = 0, escape at step s fades 255 -> 1.
inline unsigned char escape_gray(int32_t step, int nmax) {
    if (step < 0) return 0;
    int span = std::max(nmax, 1);
    int g = 255 - static_cast<int>((254LL * step) / span);
    return static_cast<unsigned char>(std::max(g, 1));
}

inline std::optional<std::pair<int64_t, int64_t>> frame_pixel(const GridSpec& g,
                                                              const ImageFrame& fr,
                                                              const CVec& p) {
    auto coord = [&](int axis) {
        int j = axis / 2;
        double v = (axis % 2 == 0) ? p[j].real() : p[j].imag();
        return v;
    };
    auto index = [&](int axis, int64_t count) -> int64_t {
        size_t s = static_cast<size_t>(axis);
        double t = (coord(axis) - g.lo[s]) / (g.hi[s] - g.lo[s]);
        int64_t i = static_cast<int64_t>(std::floor(t * static_cast<double>(count)));
        return std::clamp<int64_t>(i, -1, count);  // -1 / count flag "outside"
    };
    int64_t x = index(fr.axis_x, fr.width);
    int64_t y = index(fr.axis_y, fr.height);
    if (x < 0 || x >= fr.width || y < 0 || y >= fr.height) return std::nullopt;
    return std::make_pair(x, y);
}

}  // namespace detail

inline std::string render_escape_pgm(const EscapeField& field) {
    detail::ImageFrame fr = detail::image_frame(field.grid);
    std::string out = "P5\n" + std::to_string(fr.width) + " " + std::to_string(fr.height) +
                      "\n255\n";
    out.reserve(out.size() + static_cast<size_t>(fr.width * fr.height));
    for (int64_t row = 0; row < fr.height; ++row) {
        int64_t y = fr.height - 1 - row;  // top row = largest second-axis value
        for (int64_t x = 0; x < fr.width; ++x) {
            int64_t i = x * fr.stride_x + y * fr.stride_y;
            out.push_back(static_cast<char>(
                detail::escape_gray(field.steps[static_cast<size_t>(i)], field.nmax)));
        }
    }
    return out;
}

struct OverlayMark {
    CVec p;
    unsigned char r = 255, g = 0, b = 0;
};

// Colored dots on the grid's two-axis frame; background is the escape field
// when given, otherwise white.  Marks outside the frame box are skipped.
inline std::string render_overlay_ppm(const GridSpec& grid, const std::vector<OverlayMark>& marks,
                                      const EscapeField* base = nullptr) {
    grid.validate();
    if (base && &base->grid != &grid) {
        // the caller may pass the field's own grid; anything else must agree
        detail::ImageFrame a = detail::image_frame(grid);
        detail::ImageFrame b = detail::image_frame(base->grid);
        if (a.width != b.width || a.height != b.height || a.axis_x != b.axis_x ||
            a.axis_y != b.axis_y)
            throw InvalidInputError("overlay base field does not match the frame grid");
    }
    detail::ImageFrame fr = detail::image_frame(grid);
    std::vector<unsigned char> pix(static_cast<size_t>(fr.width * fr.height * 3), 255);
    if (base) {
        for (int64_t row = 0; row < fr.height; ++row) {
            int64_t y = fr.height - 1 - row;
            for (int64_t x = 0; x < fr.width; ++x) {
                int64_t i = x * fr.stride_x + y * fr.stride_y;
                unsigned char g =
                    detail::escape_gray(base->steps[static_cast<size_t>(i)], base->nmax);
                size_t at = static_cast<size_t>((row * fr.width + x) * 3);
                pix[at] = pix[at + 1] = pix[at + 2] = g;
            }
        }
    }
    for (const OverlayMark& m : marks) {
        auto hit = detail::frame_pixel(grid, fr, m.p);
        if (!hit) continue;
        int64_t col = hit->first;
        int64_t row = fr.height - 1 - hit->second;
        for (int64_t dr = -1; dr <= 1; ++dr)
            for (int64_t dc = -1; dc <= 1; ++dc) {
                int64_t r = row + dr, c = col + dc;
                if (r < 0 || r >= fr.height || c < 0 || c >= fr.width) continue;
                size_t at = static_cast<size_t>((r * fr.width + c) * 3);
                pix[at] = m.r;
                pix[at + 1] = m.g;
                pix[at + 2] = m.b;
            }
    }
    std::string out = "P6\n" + std::to_string(fr.width) + " " + std::to_string(fr.height) +
                      "\n255\n";
    out.append(reinterpret_cast<const char*>(pix.data()), pix.size());
    return out;
}

}  // namespace invariantlab
