#pragma once

#include <cstdio>
#include <filesystem>
#include <memory>

#include <png.h>

#include "heaven/types.hpp"
#include "heaven/vspage.hpp"

namespace heaven {

inline void write_png(const Raster& raster, const std::filesystem::path& path) {
    if (raster.width < 1 || raster.height < 1)
        throw Error(Errc::invalid_argument, "write_png: empty raster");
    std::unique_ptr<std::FILE, int (*)(std::FILE*)> fp(std::fopen(path.c_str(), "wb"),
                                                       std::fclose);
    if (!fp) throw Error(Errc::io, "cannot open for write: " + path.string());

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw Error(Errc::io, "libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error(Errc::io, "png write failed: " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, raster.width, raster.height, 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (std::int32_t y = 0; y < raster.height; ++y)
        png_write_row(png, const_cast<png_bytep>(raster.rgb.data() +
                                                 static_cast<std::size_t>(y) * raster.width * 3));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

inline Raster read_png(const std::filesystem::path& path) {
    std::unique_ptr<std::FILE, int (*)(std::FILE*)> fp(std::fopen(path.c_str(), "rb"),
                                                       std::fclose);
    if (!fp) throw Error(Errc::missing_file, "cannot open: " + path.string());

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error(Errc::io, "libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error(Errc::io, "png read failed: " + path.string());
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    // Normalize everything to 8-bit RGB.
    png_set_expand(png);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    if (png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY ||
        png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(png);
    png_read_update_info(png, info);

    Raster out;
    out.width = static_cast<std::int32_t>(png_get_image_width(png, info));
    out.height = static_cast<std::int32_t>(png_get_image_height(png, info));
    out.rgb.resize(static_cast<std::size_t>(3) * out.width * out.height);
    for (std::int32_t y = 0; y < out.height; ++y)
        png_read_row(png, out.rgb.data() + static_cast<std::size_t>(y) * out.width * 3, nullptr);
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

}  // namespace heaven
