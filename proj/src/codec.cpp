#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <vector>

#include <jpeglib.h>
#include <png.h>

#include "banet/errors.hpp"
#include "banet/image.hpp"

namespace banet::img {

namespace {

enum class FileKind { Png, Jpeg, Unknown };

FileKind sniff(const std::string& path) {
    FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw DataError("cannot open " + path);
    unsigned char sig[4] = {0, 0, 0, 0};
    size_t n = std::fread(sig, 1, 4, f);
    std::fclose(f);
    if (n >= 4 && sig[0] == 0x89 && sig[1] == 'P' && sig[2] == 'N' && sig[3] == 'G')
        return FileKind::Png;
    if (n >= 2 && sig[0] == 0xFF && sig[1] == 0xD8) return FileKind::Jpeg;
    return FileKind::Unknown;
}

struct JpegErr {
    jpeg_error_mgr pub;
    jmp_buf jb;
    char msg[JMSG_LENGTH_MAX];
};

void jpeg_err_exit(j_common_ptr cinfo) {
    auto* e = reinterpret_cast<JpegErr*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, e->msg);
    longjmp(e->jb, 1);
}

Image decode_jpeg(const std::string& path) {
    FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw DataError("cannot open " + path);
    jpeg_decompress_struct cinfo;
    JpegErr jerr;
    cinfo.err = jpeg_std_error(&jerr.pub);
    jerr.pub.error_exit = jpeg_err_exit;
    if (setjmp(jerr.jb)) {
        jpeg_destroy_decompress(&cinfo);
        std::fclose(f);
        throw DataError(path + ": " + jerr.msg);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, f);
    jpeg_read_header(&cinfo, TRUE);
    bool was_gray = cinfo.jpeg_color_space == JCS_GRAYSCALE;
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    int w = static_cast<int>(cinfo.output_width);
    int h = static_cast<int>(cinfo.output_height);
    std::vector<unsigned char> row(static_cast<size_t>(w) * 3);
    Image im(h, w);
    unsigned char* rp = row.data();
    while (cinfo.output_scanline < cinfo.output_height) {
        int y = static_cast<int>(cinfo.output_scanline);
        jpeg_read_scanlines(&cinfo, &rp, 1);
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                im.at(c, y, x) = row[static_cast<size_t>(x) * 3 + c] / 255.f;
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    std::fclose(f);
    if (was_gray)
        std::fprintf(stderr, "warning: %s: grayscale input replicated to RGB\n", path.c_str());
    return im;
}

Image decode_png(const std::string& path) {
    png_image pim;
    std::memset(&pim, 0, sizeof pim);
    pim.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&pim, path.c_str()))
        throw DataError(path + ": " + pim.message);
    bool had_alpha = (pim.format & PNG_FORMAT_FLAG_ALPHA) != 0;
    bool had_color = (pim.format & PNG_FORMAT_FLAG_COLOR) != 0;
    if (pim.format & PNG_FORMAT_FLAG_LINEAR) {
        png_image_free(&pim);
        throw DataError(path + ": 16-bit PNG unsupported, expected 8-bit");
    }
    pim.format = PNG_FORMAT_RGBA;
    std::vector<unsigned char> buf(PNG_IMAGE_SIZE(pim));
    if (!png_image_finish_read(&pim, nullptr, buf.data(), 0, nullptr))
        throw DataError(path + ": " + pim.message);
    int w = static_cast<int>(pim.width), h = static_cast<int>(pim.height);
    Image im(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const unsigned char* px = &buf[(static_cast<size_t>(y) * w + x) * 4];
            for (int c = 0; c < 3; ++c) im.at(c, y, x) = px[c] / 255.f;
        }
    if (had_alpha)
        std::fprintf(stderr, "warning: %s: alpha channel dropped\n", path.c_str());
    if (!had_color)
        std::fprintf(stderr, "warning: %s: grayscale input replicated to RGB\n", path.c_str());
    return im;
}

} // namespace

Image load_image(const std::string& path) {
    switch (sniff(path)) {
        case FileKind::Png: return decode_png(path);
        case FileKind::Jpeg: return decode_jpeg(path);
        default: throw DataError(path + ": unrecognized image format (want PNG or JPEG)");
    }
}

MaskMap load_mask(const std::string& path, MaskRole role) {
    if (sniff(path) != FileKind::Png)
        throw DataError(path + ": masks must be PNG");
    png_image pim;
    std::memset(&pim, 0, sizeof pim);
    pim.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&pim, path.c_str()))
        throw DataError(path + ": " + pim.message);
    if (pim.format & (PNG_FORMAT_FLAG_COLOR | PNG_FORMAT_FLAG_ALPHA)) {
        png_image_free(&pim);
        throw DataError(path + ": mask must be single-channel grayscale");
    }
    if (pim.format & PNG_FORMAT_FLAG_LINEAR) {
        png_image_free(&pim);
        throw DataError(path + ": 16-bit PNG unsupported, expected 8-bit");
    }
    pim.format = PNG_FORMAT_GRAY;
    std::vector<unsigned char> buf(PNG_IMAGE_SIZE(pim));
    if (!png_image_finish_read(&pim, nullptr, buf.data(), 0, nullptr))
        throw DataError(path + ": " + pim.message);
    int w = static_cast<int>(pim.width), h = static_cast<int>(pim.height);
    Planef m(h, w);
    bool hard = role == MaskRole::SegTarget || role == MaskRole::BoundaryTarget;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            unsigned char v = buf[static_cast<size_t>(y) * w + x];
            m.at(y, x) = hard ? (v > 127 ? 1.f : 0.f) : v / 255.f;
        }
    return MaskMap(std::move(m), role);
}

void save_mask(const std::string& path, const Planef& m) {
    png_image pim;
    std::memset(&pim, 0, sizeof pim);
    pim.version = PNG_IMAGE_VERSION;
    pim.width = static_cast<png_uint_32>(m.w);
    pim.height = static_cast<png_uint_32>(m.h);
    pim.format = PNG_FORMAT_GRAY;
    std::vector<unsigned char> buf(static_cast<size_t>(m.h) * m.w);
    for (size_t i = 0; i < m.v.size(); ++i) {
        float v = std::clamp(m.v[i], 0.f, 1.f);
        buf[i] = static_cast<unsigned char>(std::lround(v * 255.f));
    }
    if (!png_image_write_to_file(&pim, path.c_str(), 0, buf.data(), 0, nullptr))
        throw DataError(path + ": " + pim.message);
}

void save_image(const std::string& path, const Image& im) {
    png_image pim;
    std::memset(&pim, 0, sizeof pim);
    pim.version = PNG_IMAGE_VERSION;
    pim.width = static_cast<png_uint_32>(im.w);
    pim.height = static_cast<png_uint_32>(im.h);
    pim.format = PNG_FORMAT_RGB;
    std::vector<unsigned char> buf(static_cast<size_t>(im.h) * im.w * 3);
    for (int y = 0; y < im.h; ++y)
        for (int x = 0; x < im.w; ++x)
            for (int c = 0; c < 3; ++c) {
                float v = std::clamp(im.at(c, y, x), 0.f, 1.f);
                buf[(static_cast<size_t>(y) * im.w + x) * 3 + c] =
                    static_cast<unsigned char>(std::lround(v * 255.f));
            }
    if (!png_image_write_to_file(&pim, path.c_str(), 0, buf.data(), 0, nullptr))
        throw DataError(path + ": " + pim.message);
}

} // namespace banet::img
