#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <vector>

#include "heaven/types.hpp"

namespace heaven {

struct PageRange {
    std::int32_t begin = 0;  // inclusive
    std::int32_t end = 0;    // exclusive
    bool operator==(const PageRange&) const = default;
};

/// Splits [0, page_count) into ceil(page_count / r) consecutive windows;
/// all windows have length r except possibly the last.
inline std::vector<PageRange> partition_document(std::int32_t page_count, std::int32_t r) {
    if (page_count < 1)
        throw Error(Errc::invalid_argument, "partition_document: page_count < 1");
    if (r < 1) throw Error(Errc::invalid_argument, "partition_document: r < 1");
    std::vector<PageRange> ranges;
    for (std::int32_t begin = 0; begin < page_count; begin += r)
        ranges.push_back({begin, std::min(begin + r, page_count)});
    return ranges;
}

struct VSPageRecord {
    VSPageId id;
    std::vector<PageId> member_pages;
    std::vector<LayoutBox> title_crops;
};

/// Groups a document's title layouts by consecutive page windows of size r.
/// Every page belongs to exactly one VS-page, including pages without any
/// title, so the page -> VS-page map stays total.
inline std::vector<VSPageRecord> build_vs_pages(std::int32_t doc_index,
                                                const DocumentMeta& doc,
                                                std::vector<LayoutBox> titles,
                                                std::int32_t r) {
    for (const auto& t : titles) {
        if (t.page.doc_index != doc_index)
            throw Error(Errc::out_of_range, "build_vs_pages: title from another document");
        if (t.page.page_index < 0 || t.page.page_index >= doc.page_count)
            throw Error(Errc::out_of_range, "build_vs_pages: title page out of range");
    }
    // Reading order inside a VS-page: page, then top-to-bottom, left-to-right.
    std::sort(titles.begin(), titles.end(), [](const LayoutBox& a, const LayoutBox& b) {
        if (a.page.page_index != b.page.page_index) return a.page.page_index < b.page.page_index;
        if (a.y0 != b.y0) return a.y0 < b.y0;
        return a.x0 < b.x0;
    });

    const auto ranges = partition_document(doc.page_count, std::min(r, doc.page_count));
    std::vector<VSPageRecord> records;
    records.reserve(ranges.size());
    for (std::size_t j = 0; j < ranges.size(); ++j) {
        VSPageRecord rec;
        rec.id = {doc_index, static_cast<std::int32_t>(j)};
        for (std::int32_t i = ranges[j].begin; i < ranges[j].end; ++i)
            rec.member_pages.push_back({doc_index, i});
        for (const auto& t : titles)
            if (t.page.page_index >= ranges[j].begin && t.page.page_index < ranges[j].end)
                rec.title_crops.push_back(t);
        records.push_back(std::move(rec));
    }
    return records;
}

struct PageDims {
    std::int32_t width = 0;
    std::int32_t height = 0;
};

struct CropInstruction {
    PageId source;
    std::int32_t x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // pixel rect on the source page
    std::int32_t target_y = 0;                     // vertical offset in the composite
    std::int32_t width() const { return x1 - x0; }
    std::int32_t height() const { return y1 - y0; }
    bool operator==(const CropInstruction&) const = default;
};

struct AssemblyManifest {
    VSPageId id;
    std::vector<CropInstruction> crops;
    std::int32_t width = 1;
    std::int32_t height = 1;
};

/// Crop instructions for vertical stacking: offsets are prefix sums of crop
/// heights, composite width is the max crop width, no scaling anywhere.
/// An empty record yields a 1x1 blank composite.
inline AssemblyManifest assemble_manifest(const VSPageRecord& record,
                                          const std::map<PageId, PageDims>& page_dims) {
    AssemblyManifest m;
    m.id = record.id;
    std::int32_t y = 0;
    std::int32_t max_w = 0;
    for (const auto& box : record.title_crops) {
        box.validate();
        auto it = page_dims.find(box.page);
        if (it == page_dims.end())
            throw Error(Errc::missing_file, "assemble_manifest: unknown page dimensions");
        CropInstruction c;
        c.source = box.page;
        c.x0 = static_cast<std::int32_t>(std::lround(box.x0));
        c.y0 = static_cast<std::int32_t>(std::lround(box.y0));
        c.x1 = static_cast<std::int32_t>(std::lround(box.x1));
        c.y1 = static_cast<std::int32_t>(std::lround(box.y1));
        if (c.x0 < 0 || c.y0 < 0 || c.x1 > it->second.width || c.y1 > it->second.height)
            throw Error(Errc::out_of_range, "assemble_manifest: bbox exceeds page bounds");
        if (c.width() < 1 || c.height() < 1)
            throw Error(Errc::invalid_argument, "assemble_manifest: degenerate crop rect");
        c.target_y = y;
        y += c.height();
        max_w = std::max(max_w, c.width());
        m.crops.push_back(c);
    }
    m.width = std::max(max_w, 1);
    m.height = std::max(y, 1);
    return m;
}

/// 8-bit RGB raster, row-major.
struct Raster {
    std::int32_t width = 0;
    std::int32_t height = 0;
    std::vector<std::uint8_t> rgb;  // 3 * width * height

    static Raster blank(std::int32_t w, std::int32_t h, std::uint8_t value = 0xFF) {
        Raster r;
        r.width = w;
        r.height = h;
        r.rgb.assign(static_cast<std::size_t>(3) * w * h, value);
        return r;
    }

    bool operator==(const Raster&) const = default;
};

/// Renders a composite by copying each crop region pixel-exact to its target
/// offset; uncovered pixels stay white.
inline Raster render_vs_page(const AssemblyManifest& manifest,
                             const std::function<const Raster*(PageId)>& page_raster) {
    Raster out = Raster::blank(manifest.width, manifest.height);
    for (const auto& c : manifest.crops) {
        const Raster* src = page_raster(c.source);
        if (!src)
            throw Error(Errc::missing_file, "render_vs_page: missing page raster");
        if (c.x1 > src->width || c.y1 > src->height)
            throw Error(Errc::dimension_mismatch,
                        "render_vs_page: raster smaller than declared page dims");
        for (std::int32_t row = 0; row < c.height(); ++row) {
            const std::uint8_t* s =
                src->rgb.data() + (static_cast<std::size_t>(c.y0 + row) * src->width + c.x0) * 3;
            std::uint8_t* d =
                out.rgb.data() +
                (static_cast<std::size_t>(c.target_y + row) * out.width) * 3;
            std::copy(s, s + static_cast<std::size_t>(c.width()) * 3, d);
        }
    }
    return out;
}

inline Raster render_vs_page(const AssemblyManifest& manifest,
                             const std::map<PageId, Raster>& rasters) {
    return render_vs_page(manifest, [&](PageId p) -> const Raster* {
        auto it = rasters.find(p);
        return it == rasters.end() ? nullptr : &it->second;
    });
}

}  // namespace heaven
