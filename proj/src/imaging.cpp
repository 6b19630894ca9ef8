#include "vbp/imaging.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace vbp {

namespace {

// Skips netpbm whitespace and '#' comment lines, then reads one unsigned
// decimal token.
int read_token(std::istream& in, const std::filesystem::path& path) {
    int ch = in.get();
    while (ch != EOF) {
        if (ch == '#') {
            while (ch != EOF && ch != '\n') ch = in.get();
        } else if (!std::isspace(ch)) {
            break;
        }
        ch = in.get();
    }
    if (ch == EOF || !std::isdigit(ch))
        throw Error("malformed netpbm header in " + path.string());
    int value = 0;
    while (ch != EOF && std::isdigit(ch)) {
        value = value * 10 + (ch - '0');
        ch = in.get();
    }
    // ch is the single whitespace byte terminating the token.
    return value;
}

std::uint8_t quantize(double x) {
    // round-half-up on [0,255]
    double v = std::floor(x + 0.5);
    if (v < 0.0) v = 0.0;
    if (v > 255.0) v = 255.0;
    return static_cast<std::uint8_t>(v);
}

}  // namespace

Image load_image(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open image " + path.string());

    char magic[2] = {0, 0};
    f.read(magic, 2);
    Image img;
    if (magic[0] == 'P' && magic[1] == '5') {
        img.channels = 1;
    } else if (magic[0] == 'P' && magic[1] == '6') {
        img.channels = 3;
    } else {
        throw Error("unsupported netpbm magic in " + path.string() + " (want P5 or P6)");
    }

    img.width = read_token(f, path);
    img.height = read_token(f, path);
    const int maxval = read_token(f, path);
    if (maxval != 255) {
        std::ostringstream os;
        os << "unsupported maxval " << maxval << " in " << path.string() << " (want 255)";
        throw Error(os.str());
    }
    if (img.width <= 0 || img.height <= 0)
        throw Error("invalid image dimensions in " + path.string());

    const std::size_t n = static_cast<std::size_t>(img.width) * img.height * img.channels;
    img.pixels.resize(n);
    f.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(f.gcount()) != n) {
        std::ostringstream os;
        os << "truncated netpbm payload in " << path.string() << ": expected " << n
           << " bytes, got " << f.gcount();
        throw Error(os.str());
    }
    return img;
}

void save_image(const Image& img, const std::filesystem::path& path) {
    if (img.channels != 1 && img.channels != 3)
        throw Error("save_image supports 1 or 3 channels");
    const std::size_t n = static_cast<std::size_t>(img.width) * img.height * img.channels;
    if (img.pixels.size() != n) throw Error("image pixel count does not match dimensions");

    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open " + path.string() + " for writing");
    f << (img.channels == 1 ? "P5" : "P6") << "\n"
      << img.width << " " << img.height << "\n255\n";
    f.write(reinterpret_cast<const char*>(img.pixels.data()), static_cast<std::streamsize>(n));
    if (!f) throw Error("write failure on " + path.string());
}

Tensor to_input_tensor(const Image& img) {
    Tensor t({img.channels, img.height, img.width});
    const std::size_t plane = static_cast<std::size_t>(img.height) * img.width;
    for (std::size_t px = 0; px < plane; ++px)
        for (int c = 0; c < img.channels; ++c)
            t[c * plane + px] = static_cast<float>(img.pixels[px * img.channels + c]) / 255.0f;
    return t;
}

Image overlay_red(const Image& gray, const Tensor& mask) {
    if (gray.channels != 1) throw Error("overlay_red expects a grayscale image");
    if (mask.rank() != 2 || mask.shape()[0] != gray.height || mask.shape()[1] != gray.width)
        throw ShapeError("overlay_red mask shape does not match image");

    Image out;
    out.width = gray.width;
    out.height = gray.height;
    out.channels = 3;
    const std::size_t plane = static_cast<std::size_t>(gray.height) * gray.width;
    out.pixels.resize(plane * 3);
    for (std::size_t px = 0; px < plane; ++px) {
        const double g = gray.pixels[px];
        const double v = mask[px];
        const std::uint8_t red = std::max<std::uint8_t>(gray.pixels[px], quantize(255.0 * v));
        const std::uint8_t dim = quantize(g * (1.0 - v));
        out.pixels[px * 3 + 0] = red;
        out.pixels[px * 3 + 1] = dim;
        out.pixels[px * 3 + 2] = dim;
    }
    return out;
}

}  // namespace vbp
