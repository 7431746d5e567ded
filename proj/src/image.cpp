#include "igcn/image.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>

namespace igcn {

Image load_pgm16(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("pgm: cannot open " + path.string());
    std::string magic;
    in >> magic;
    if (magic != "P5") throw ValidationError("pgm: expected P5, got '" + magic + "'");
    int w = 0, h = 0, maxval = 0;
    // Skip whitespace and comment lines between header fields.
    const auto next_int = [&](int& out) {
        while (true) {
            const int c = in.peek();
            if (c == '#') {
                std::string line;
                std::getline(in, line);
            } else if (std::isspace(c)) {
                in.get();
            } else {
                break;
            }
        }
        if (!(in >> out)) throw ValidationError("pgm: truncated header");
    };
    next_int(w);
    next_int(h);
    next_int(maxval);
    if (maxval != 65535) throw ValidationError("pgm: expected 16-bit maxval 65535");
    in.get();  // single whitespace after maxval
    Image img(h, w);
    std::vector<std::uint8_t> raw(static_cast<std::size_t>(w) * h * 2);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!in) throw ValidationError("pgm: truncated pixel data");
    for (std::size_t i = 0; i < img.px.size(); ++i) {
        const std::uint16_t v =
            static_cast<std::uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]);  // big-endian
        img.px[i] = static_cast<float>(v) / 65535.0f;
    }
    return img;
}

void save_pgm16(const Image& img, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("pgm: cannot write " + path.string());
    out << "P5\n" << img.width << ' ' << img.height << "\n65535\n";
    std::vector<std::uint8_t> raw(img.px.size() * 2);
    for (std::size_t i = 0; i < img.px.size(); ++i) {
        float v = img.px[i];
        if (v < 0.0f) v = 0.0f;
        if (v > 1.0f) v = 1.0f;
        const auto q = static_cast<std::uint16_t>(std::lround(v * 65535.0f));
        raw[2 * i] = static_cast<std::uint8_t>(q >> 8);
        raw[2 * i + 1] = static_cast<std::uint8_t>(q & 0xff);
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
}

} // namespace igcn
