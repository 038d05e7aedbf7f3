#include "semvis/image_io.hpp"

#include <cctype>
#include <fstream>
#include <string>

namespace semvis {

namespace {

// Reads the next whitespace-delimited header token, skipping '#' comments.
std::string header_token(std::istream& in) {
    std::string token;
    int ch = in.get();
    while (ch != EOF) {
        if (ch == '#') {
            while (ch != EOF && ch != '\n') ch = in.get();
        } else if (std::isspace(ch) != 0) {
            if (!token.empty()) break;
        } else {
            token.push_back(static_cast<char>(ch));
        }
        ch = in.get();
    }
    return token;
}

struct NetpbmHeader {
    std::size_t width, height;
};

NetpbmHeader read_header(std::istream& in, const std::string& magic, const std::filesystem::path& path) {
    const std::string got = header_token(in);
    if (got != magic) {
        throw FormatError(path.string() + ": expected magic " + magic + ", found '" + got + "'");
    }
    try {
        const std::size_t w = std::stoul(header_token(in));
        const std::size_t h = std::stoul(header_token(in));
        const std::size_t maxval = std::stoul(header_token(in));
        if (w == 0 || h == 0 || maxval != 255) {
            throw FormatError(path.string() + ": unsupported raster header");
        }
        return {w, h};
    } catch (const std::logic_error&) {
        throw FormatError(path.string() + ": malformed raster header");
    }
}

std::vector<std::uint8_t> read_payload(std::istream& in, std::size_t bytes,
                                       const std::filesystem::path& path) {
    std::vector<std::uint8_t> out(bytes);
    in.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(bytes));
    if (static_cast<std::size_t>(in.gcount()) != bytes) {
        throw FormatError(path.string() + ": truncated raster payload");
    }
    return out;
}

void write_raster(const std::filesystem::path& path, const char* magic, std::size_t w, std::size_t h,
                  const std::vector<std::uint8_t>& pixels) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << magic << '\n' << w << ' ' << h << "\n255\n";
    out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
    if (!out) {
        throw IoError("failed writing " + path.string());
    }
}

}  // namespace

RgbImage read_ppm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    const auto [w, h] = read_header(in, "P6", path);
    RgbImage image;
    image.width = w;
    image.height = h;
    image.pixels = read_payload(in, w * h * 3, path);
    return image;
}

void write_ppm(const std::filesystem::path& path, const RgbImage& image) {
    if (image.pixels.size() != image.width * image.height * 3) {
        throw ContractError("write_ppm: pixel buffer does not match image size");
    }
    write_raster(path, "P6", image.width, image.height, image.pixels);
}

GrayImage read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    const auto [w, h] = read_header(in, "P5", path);
    return {w, h, read_payload(in, w * h, path)};
}

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
    if (image.pixels.size() != image.width * image.height) {
        throw ContractError("write_pgm: pixel buffer does not match image size");
    }
    write_raster(path, "P5", image.width, image.height, image.pixels);
}

Tensor image_to_tensor(const RgbImage& image) {
    if (image.width == 0 || image.height == 0) {
        throw DimensionError("image_to_tensor: empty image");
    }
    const std::size_t plane = image.width * image.height;
    std::vector<double> out(3 * plane);
    for (std::size_t p = 0; p < plane; ++p) {
        for (std::size_t c = 0; c < 3; ++c) {
            out[c * plane + p] = static_cast<double>(image.pixels[p * 3 + c]) / 255.0;
        }
    }
    return Tensor(Shape{3, image.height, image.width}, std::move(out));
}

}  // namespace semvis
