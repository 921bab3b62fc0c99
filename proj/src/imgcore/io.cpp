#include "endo/imgcore/io.hpp"

#include <png.h>

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

namespace endo::img {

namespace {

using nlohmann::json;

struct PgmHeader {
    int width = 0;
    int height = 0;
    int maxval = 0;
};

// Reads the next whitespace-delimited token, skipping '#' comments.
std::string next_token(std::istream& in) {
    std::string token;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {}
            continue;
        }
        if (std::isspace(c)) {
            if (!token.empty()) break;
            continue;
        }
        token.push_back(static_cast<char>(c));
    }
    return token;
}

PgmHeader read_pgm_header(std::istream& in, const std::filesystem::path& path) {
    if (next_token(in) != "P5") throw IoError("not a binary PGM (P5): " + path.string());
    PgmHeader h;
    try {
        h.width = std::stoi(next_token(in));
        h.height = std::stoi(next_token(in));
        h.maxval = std::stoi(next_token(in));
    } catch (const std::exception&) {
        throw IoError("malformed PGM header: " + path.string());
    }
    if (h.width <= 0 || h.height <= 0 || h.maxval <= 0 || h.maxval > 65535) {
        throw IoError("invalid PGM header values: " + path.string());
    }
    return h;
}

std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    return out;
}

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void write_png_rows(const std::filesystem::path& path, int width, int height, int color_type,
                    const std::vector<png_bytep>& rows) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoError("cannot open for writing: " + path.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng initialization failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("PNG encode failed: " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, width, height, 8, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, const_cast<png_bytepp>(rows.data()));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace

void write_pgm(const std::filesystem::path& path, const Image2D& image) {
    auto out = open_out(path);
    out << "P5\n" << image.width() << ' ' << image.height() << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.data().data()), static_cast<std::streamsize>(image.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

Image2D read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());
    const PgmHeader h = read_pgm_header(in, path);
    if (h.maxval > 255) throw IoError("expected an 8-bit PGM: " + path.string());
    Image2D image(h.width, h.height);
    in.read(reinterpret_cast<char*>(image.data().data()), static_cast<std::streamsize>(image.size()));
    if (in.gcount() != static_cast<std::streamsize>(image.size())) throw IoError("truncated PGM: " + path.string());
    return image;
}

void write_png(const std::filesystem::path& path, const Image2D& image) {
    std::vector<png_bytep> rows(static_cast<std::size_t>(image.height()));
    auto* base = const_cast<std::uint8_t*>(image.data().data());
    for (int y = 0; y < image.height(); ++y) rows[y] = base + static_cast<std::size_t>(y) * image.width();
    write_png_rows(path, image.width(), image.height(), PNG_COLOR_TYPE_GRAY, rows);
}

void write_png(const std::filesystem::path& path, const RgbImage& image) {
    std::vector<png_bytep> rows(static_cast<std::size_t>(image.height()));
    auto* base = reinterpret_cast<std::uint8_t*>(const_cast<std::array<std::uint8_t, 3>*>(image.data().data()));
    for (int y = 0; y < image.height(); ++y) rows[y] = base + static_cast<std::size_t>(y) * image.width() * 3;
    write_png_rows(path, image.width(), image.height(), PNG_COLOR_TYPE_RGB, rows);
}

Image2D read_png(const std::filesystem::path& path) {
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&img, path.c_str())) {
        throw IoError("cannot read PNG " + path.string() + ": " + img.message);
    }
    img.format = PNG_FORMAT_GRAY;
    Image2D image(static_cast<int>(img.width), static_cast<int>(img.height));
    if (!png_image_finish_read(&img, nullptr, image.data().data(), 0, nullptr)) {
        png_image_free(&img);
        throw IoError("PNG decode failed " + path.string() + ": " + img.message);
    }
    return image;
}

Image2D read_image(const std::filesystem::path& path) {
    return path.extension() == ".png" ? read_png(path) : read_pgm(path);
}

void write_image(const std::filesystem::path& path, const Image2D& image) {
    if (path.extension() == ".png") {
        write_png(path, image);
    } else {
        write_pgm(path, image);
    }
}

void write_pgm16(const std::filesystem::path& path, const Raster<std::uint16_t>& raster) {
    auto out = open_out(path);
    out << "P5\n" << raster.width() << ' ' << raster.height() << "\n65535\n";
    std::vector<char> bytes(raster.size() * 2);
    for (std::size_t i = 0; i < raster.size(); ++i) {
        bytes[2 * i] = static_cast<char>(raster[i] >> 8);
        bytes[2 * i + 1] = static_cast<char>(raster[i] & 0xFF);
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

Raster<std::uint16_t> read_pgm16(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());
    const PgmHeader h = read_pgm_header(in, path);
    if (h.maxval != 65535) throw IoError("expected a 16-bit PGM (maxval 65535): " + path.string());
    Raster<std::uint16_t> raster(h.width, h.height);
    std::vector<unsigned char> bytes(raster.size() * 2);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (in.gcount() != static_cast<std::streamsize>(bytes.size())) throw IoError("truncated PGM: " + path.string());
    for (std::size_t i = 0; i < raster.size(); ++i) {
        raster[i] = static_cast<std::uint16_t>((bytes[2 * i] << 8) | bytes[2 * i + 1]);
    }
    return raster;
}

std::filesystem::path sidecar_path(const std::filesystem::path& map_path) {
    return std::filesystem::path(map_path.string() + ".json");
}

void write_probmap(const std::filesystem::path& path, const ProbMap& map, const Provenance& provenance) {
    Raster<std::uint16_t> q(map.width(), map.height());
    for (std::size_t i = 0; i < map.size(); ++i) {
        const double p = std::isnan(map[i]) ? 0.0 : std::clamp(map[i], 0.0, 1.0);
        q[i] = static_cast<std::uint16_t>(std::lround(p * 65535.0));
    }
    write_pgm16(path, q);
    json meta = {{"format", "probmap-pgm16"},
                 {"width", map.width()},
                 {"height", map.height()},
                 {"pixel_pitch_um", map.pixel_pitch()},
                 {"provenance", provenance}};
    auto out = open_out(sidecar_path(path));
    out << meta.dump(2) << '\n';
}

ProbMap read_probmap(const std::filesystem::path& path, Provenance* provenance) {
    const auto q = read_pgm16(path);
    double pitch = kDefaultPixelPitchUm;
    const auto meta_path = sidecar_path(path);
    if (std::filesystem::exists(meta_path)) {
        std::ifstream in(meta_path);
        json meta;
        try {
            in >> meta;
            pitch = meta.at("pixel_pitch_um").get<double>();
            if (meta.at("width").get<int>() != q.width() || meta.at("height").get<int>() != q.height()) {
                throw IoError("sidecar shape does not match raster: " + meta_path.string());
            }
            if (provenance) *provenance = meta.value("provenance", Provenance{});
        } catch (const json::exception& e) {
            throw IoError("malformed sidecar " + meta_path.string() + ": " + e.what());
        }
    }
    ProbMap map(q.width(), q.height(), 0.0, pitch);
    for (std::size_t i = 0; i < q.size(); ++i) map[i] = q[i] / 65535.0;
    return map;
}

void write_labelmap(const std::filesystem::path& path, const LabelMap& labels) {
    Raster<std::uint16_t> q(labels.width(), labels.height());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] > 65535) throw IoError("label out of 16-bit range");
        q[i] = static_cast<std::uint16_t>(labels[i]);
    }
    write_pgm16(path, q);
}

LabelMap read_labelmap(const std::filesystem::path& path) {
    const auto q = read_pgm16(path);
    LabelMap labels(q.width(), q.height());
    for (std::size_t i = 0; i < q.size(); ++i) labels[i] = q[i];
    return labels;
}

}  // namespace endo::img
