#pragma once

#include "cascade/data.hpp"
#include "cascade/rng.hpp"

namespace cascade {

struct AugmentFlags {
    bool pad_crop = false;  // reflection-pad 4, random crop back
    bool flip = false;      // random horizontal flip
    bool normalize = true;  // standard-normalize with training-set statistics
    bool cutout = false;    // 8x8 zero block after normalization
    std::size_t pad = 4;
    std::size_t cutout_size = 8;
};

// Reflect indexing that mirrors without repeating the edge sample.
inline std::size_t reflect_index(long i, std::size_t n) {
    if (n == 1) return 0;
    const long m = long(n);
    while (i < 0 || i >= m) {
        if (i < 0) i = -i;
        if (i >= m) i = 2 * m - 2 - i;
    }
    return std::size_t(i);
}

inline Image reflect_pad(const Image& img, std::size_t pad) {
    Image out;
    out.channels = img.channels;
    out.height = img.height + 2 * pad;
    out.width = img.width + 2 * pad;
    out.pix.resize(out.channels * out.height * out.width);
    for (std::size_t c = 0; c < out.channels; ++c)
        for (std::size_t y = 0; y < out.height; ++y)
            for (std::size_t x = 0; x < out.width; ++x)
                out.at(c, y, x) = img.at(c, reflect_index(long(y) - long(pad), img.height),
                                         reflect_index(long(x) - long(pad), img.width));
    return out;
}

inline Image crop(const Image& img, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w) {
    Image out;
    out.channels = img.channels;
    out.height = h;
    out.width = w;
    out.pix.resize(out.channels * h * w);
    for (std::size_t c = 0; c < img.channels; ++c)
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) out.at(c, y, x) = img.at(c, y0 + y, x0 + x);
    return out;
}

// Training-time augmentation pipeline: reflection-pad + random crop, random
// horizontal flip, standard normalization, then an optional zeroed cutout
// block (fully inside bounds, so exactly cutout_size^2 pixels per channel).
inline Image augment(const Image& img, const AugmentFlags& flags, const PixelStats& stats, Rng& rng) {
    Image out = img;
    if (flags.pad_crop) {
        Image padded = reflect_pad(out, flags.pad);
        const std::size_t y0 = rng.index(2 * flags.pad + 1);
        const std::size_t x0 = rng.index(2 * flags.pad + 1);
        out = crop(padded, y0, x0, img.height, img.width);
    }
    if (flags.flip && rng.coin()) {
        for (std::size_t c = 0; c < out.channels; ++c)
            for (std::size_t y = 0; y < out.height; ++y)
                for (std::size_t x = 0; x < out.width / 2; ++x)
                    std::swap(out.at(c, y, x), out.at(c, y, out.width - 1 - x));
    }
    if (flags.normalize) {
        const std::size_t per = out.height * out.width;
        for (std::size_t c = 0; c < out.channels; ++c)
            for (std::size_t p = 0; p < per; ++p)
                out.pix[c * per + p] = (out.pix[c * per + p] - stats.mean[c]) / stats.stddev[c];
    }
    if (flags.cutout && flags.cutout_size <= out.height && flags.cutout_size <= out.width) {
        const std::size_t y0 = rng.index(out.height - flags.cutout_size + 1);
        const std::size_t x0 = rng.index(out.width - flags.cutout_size + 1);
        for (std::size_t c = 0; c < out.channels; ++c)
            for (std::size_t y = y0; y < y0 + flags.cutout_size; ++y)
                for (std::size_t x = x0; x < x0 + flags.cutout_size; ++x) out.at(c, y, x) = 0.f;
    }
    return out;
}

// Eval-time input: standard normalization only.
inline Image normalize_only(const Image& img, const PixelStats& stats) {
    Image out = img;
    const std::size_t per = out.height * out.width;
    for (std::size_t c = 0; c < out.channels; ++c)
        for (std::size_t p = 0; p < per; ++p)
            out.pix[c * per + p] = (out.pix[c * per + p] - stats.mean[c]) / stats.stddev[c];
    return out;
}

} // namespace cascade
