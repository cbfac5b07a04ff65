#include "nowcast/pgm.hpp"

#include <cmath>
#include <fstream>
#include <vector>

#include "nowcast/common.hpp"

namespace nowcast {

std::pair<float, float> write_pgm(const std::string& path, std::int64_t height,
                                  std::int64_t width, const float* values) {
    const std::int64_t n = height * width;
    check_dim(n > 0, "pgm panel must be non-empty");
    float lo = values[0], hi = values[0];
    for (std::int64_t i = 1; i < n; ++i) {
        lo = std::min(lo, values[i]);
        hi = std::max(hi, values[i]);
    }
    const float range = hi - lo;

    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot create '" + path + "'");
    out << "P5\n" << width << " " << height << "\n255\n";
    std::vector<unsigned char> row(static_cast<std::size_t>(width));
    for (std::int64_t y = 0; y < height; ++y) {
        for (std::int64_t x = 0; x < width; ++x) {
            const float v = values[y * width + x];
            const float scaled = range > 0 ? (v - lo) / range * 255.0f : 0.0f;
            row[static_cast<std::size_t>(x)] =
                static_cast<unsigned char>(std::lround(scaled));
        }
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    out.flush();
    if (!out) throw DataError("write to '" + path + "' failed");

    std::ofstream scale(path + ".scale.txt");
    if (!scale) throw DataError("cannot create '" + path + ".scale.txt'");
    scale << "min " << lo << "\nmax " << hi << "\n";
    return {lo, hi};
}

}  // namespace nowcast
