#include "cascade/noise.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "cascade/augment.hpp"

namespace cascade {

NoiseKind noise_kind_from_name(const std::string& name) {
    if (name == "focus") return NoiseKind::Focus;
    if (name == "perlin") return NoiseKind::Perlin;
    if (name == "occlusion") return NoiseKind::Occlusion;
    if (name == "resolution") return NoiseKind::Resolution;
    if (name == "translation") return NoiseKind::Translation;
    if (name == "rotation") return NoiseKind::Rotation;
    throw std::invalid_argument("unknown noise kind '" + name + "'");
}

const char* noise_kind_name(NoiseKind k) {
    switch (k) {
        case NoiseKind::Focus: return "focus";
        case NoiseKind::Perlin: return "perlin";
        case NoiseKind::Occlusion: return "occlusion";
        case NoiseKind::Resolution: return "resolution";
        case NoiseKind::Translation: return "translation";
        case NoiseKind::Rotation: return "rotation";
    }
    return "?";
}

Image gaussian_blur(const Image& img, double sigma) {
    if (sigma <= 0.0) return img;
    const int radius = std::max(1, int(std::ceil(3.0 * sigma)));
    std::vector<float> k(2 * radius + 1);
    double sum = 0;
    for (int i = -radius; i <= radius; ++i) sum += (k[i + radius] = float(std::exp(-0.5 * i * i / (sigma * sigma))));
    for (auto& v : k) v = float(v / sum);

    Image tmp = img, out = img;
    for (std::size_t c = 0; c < img.channels; ++c)
        for (std::size_t y = 0; y < img.height; ++y)
            for (std::size_t x = 0; x < img.width; ++x) {
                float acc = 0;
                for (int i = -radius; i <= radius; ++i)
                    acc += k[i + radius] * img.at(c, y, reflect_index(long(x) + i, img.width));
                tmp.at(c, y, x) = acc;
            }
    for (std::size_t c = 0; c < img.channels; ++c)
        for (std::size_t y = 0; y < img.height; ++y)
            for (std::size_t x = 0; x < img.width; ++x) {
                float acc = 0;
                for (int i = -radius; i <= radius; ++i)
                    acc += k[i + radius] * tmp.at(c, reflect_index(long(y) + i, img.height), x);
                out.at(c, y, x) = acc;
            }
    return out;
}

namespace {

inline float smoothstep(float t) { return t * t * (3.f - 2.f * t); }

float image_stddev(const Image& img) {
    double m = 0;
    for (float v : img.pix) m += v;
    m /= double(img.pix.size());
    double var = 0;
    for (float v : img.pix) var += (v - m) * (v - m);
    var /= double(img.pix.size());
    return float(std::sqrt(std::max(var, 1e-12)));
}

Image focus_noise(const Image& img, const NoiseSpec& spec, Rng& rng) {
    const std::size_t p = std::min({spec.patch, img.height, img.width});
    const std::size_t y0 = rng.index(img.height - p + 1);
    const std::size_t x0 = rng.index(img.width - p + 1);
    Image out = gaussian_blur(img, spec.blur_sigma);
    for (std::size_t c = 0; c < img.channels; ++c)
        for (std::size_t y = y0; y < y0 + p; ++y)
            for (std::size_t x = x0; x < x0 + p; ++x) out.at(c, y, x) = img.at(c, y, x);
    return out;
}

Image occlusion_noise(const Image& img, const NoiseSpec& spec, Rng& rng) {
    const std::size_t p = std::min({spec.patch, img.height, img.width});
    const std::size_t y0 = rng.index(img.height - p + 1);
    const std::size_t x0 = rng.index(img.width - p + 1);
    Image out = img;
    for (std::size_t c = 0; c < img.channels; ++c)
        for (std::size_t y = y0; y < y0 + p; ++y)
            for (std::size_t x = x0; x < x0 + p; ++x) out.at(c, y, x) = spec.occlusion_value;
    return out;
}

Image perlin_noise(const Image& img, const NoiseSpec& spec, Rng& rng) {
    auto field = perlin_field(img.height, img.width, spec.perlin_cell, rng);
    // choose exactly round(coverage * H * W) distinct pixels
    const std::size_t total = img.height * img.width;
    const std::size_t want = std::size_t(std::llround(spec.coverage * double(total)));
    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = 0; i < want; ++i) std::swap(order[i], order[i + rng.index(total - i)]);
    const float amp = image_stddev(img);
    Image out = img;
    for (std::size_t i = 0; i < want; ++i) {
        const std::size_t p = order[i];
        for (std::size_t c = 0; c < img.channels; ++c) {
            float& v = out.pix[c * total + p];
            v = std::clamp(v + amp * field[p], 0.f, 1.f);
        }
    }
    return out;
}

Image resolution_noise(const Image& img, const NoiseSpec& spec) {
    const std::size_t k = std::max<std::size_t>(1, spec.down_factor);
    const std::size_t bh = (img.height + k - 1) / k, bw = (img.width + k - 1) / k;
    Image out = img;
    for (std::size_t c = 0; c < img.channels; ++c)
        for (std::size_t by = 0; by < bh; ++by)
            for (std::size_t bx = 0; bx < bw; ++bx) {
                float acc = 0;
                std::size_t n = 0;
                for (std::size_t y = by * k; y < std::min((by + 1) * k, img.height); ++y)
                    for (std::size_t x = bx * k; x < std::min((bx + 1) * k, img.width); ++x) {
                        acc += img.at(c, y, x);
                        ++n;
                    }
                acc /= float(n);
                for (std::size_t y = by * k; y < std::min((by + 1) * k, img.height); ++y)
                    for (std::size_t x = bx * k; x < std::min((bx + 1) * k, img.width); ++x)
                        out.at(c, y, x) = acc; // nearest upsample of the pooled value
            }
    return out;
}

Image translation_noise(const Image& img, const NoiseSpec& spec, Rng& rng) {
    const int dx = int(rng.index(2 * std::size_t(spec.shift) + 1)) - spec.shift;
    const int dy = int(rng.index(2 * std::size_t(spec.shift) + 1)) - spec.shift;
    Image out = img;
    for (std::size_t c = 0; c < img.channels; ++c)
        for (std::size_t y = 0; y < img.height; ++y)
            for (std::size_t x = 0; x < img.width; ++x)
                out.at(c, y, x) = img.at(c, reflect_index(long(y) - dy, img.height),
                                         reflect_index(long(x) - dx, img.width));
    return out;
}

Image rotation_noise(const Image& img, const NoiseSpec& spec, Rng& rng) {
    const double theta = rng.uniform(-spec.angle_deg, spec.angle_deg) * 3.141592653589793 / 180.0;
    const double cs = std::cos(theta), sn = std::sin(theta);
    const double cy = (double(img.height) - 1) / 2.0, cx = (double(img.width) - 1) / 2.0;
    Image out = img;
    for (std::size_t c = 0; c < img.channels; ++c)
        for (std::size_t y = 0; y < img.height; ++y)
            for (std::size_t x = 0; x < img.width; ++x) {
                // inverse-rotate the destination coordinate into the source
                const double sy = cy + (double(y) - cy) * cs - (double(x) - cx) * sn;
                const double sx = cx + (double(y) - cy) * sn + (double(x) - cx) * cs;
                const long y0 = long(std::floor(sy)), x0 = long(std::floor(sx));
                const float fy = float(sy - double(y0)), fx = float(sx - double(x0));
                auto px = [&](long yy, long xx) {
                    return img.at(c, reflect_index(yy, img.height), reflect_index(xx, img.width));
                };
                const float top = px(y0, x0) * (1 - fx) + px(y0, x0 + 1) * fx;
                const float bot = px(y0 + 1, x0) * (1 - fx) + px(y0 + 1, x0 + 1) * fx;
                out.at(c, y, x) = top * (1 - fy) + bot * fy;
            }
    return out;
}

} // namespace

std::vector<float> perlin_field(std::size_t height, std::size_t width, double cell, Rng& rng) {
    const std::size_t ny = std::size_t(std::ceil(double(height) / cell));
    const std::size_t nx = std::size_t(std::ceil(double(width) / cell));
    // unit gradients in raster order
    std::vector<float> gx((ny + 1) * (nx + 1)), gy((ny + 1) * (nx + 1));
    for (std::size_t i = 0; i < gx.size(); ++i) {
        const double a = rng.uniform(0.0, 2.0 * 3.141592653589793);
        gx[i] = float(std::cos(a));
        gy[i] = float(std::sin(a));
    }
    std::vector<float> field(height * width);
    for (std::size_t y = 0; y < height; ++y)
        for (std::size_t x = 0; x < width; ++x) {
            const double u = double(x) / cell, v = double(y) / cell;
            const std::size_t i0 = std::min(std::size_t(v), ny - 1), j0 = std::min(std::size_t(u), nx - 1);
            const float fu = float(u - double(j0)), fv = float(v - double(i0));
            auto dot = [&](std::size_t i, std::size_t j, float du, float dv) {
                const std::size_t g = i * (nx + 1) + j;
                return gx[g] * du + gy[g] * dv;
            };
            const float d00 = dot(i0, j0, fu, fv);
            const float d01 = dot(i0, j0 + 1, fu - 1, fv);
            const float d10 = dot(i0 + 1, j0, fu, fv - 1);
            const float d11 = dot(i0 + 1, j0 + 1, fu - 1, fv - 1);
            const float su = smoothstep(fu), sv = smoothstep(fv);
            const float top = d00 + su * (d01 - d00);
            const float bot = d10 + su * (d11 - d10);
            field[y * width + x] = top + sv * (bot - top);
        }
    return field;
}

Image apply_noise(const Image& img, const NoiseSpec& spec, Rng& rng) {
    switch (spec.kind) {
        case NoiseKind::Focus: return focus_noise(img, spec, rng);
        case NoiseKind::Perlin: return perlin_noise(img, spec, rng);
        case NoiseKind::Occlusion: return occlusion_noise(img, spec, rng);
        case NoiseKind::Resolution: return resolution_noise(img, spec);
        case NoiseKind::Translation: return translation_noise(img, spec, rng);
        case NoiseKind::Rotation: return rotation_noise(img, spec, rng);
    }
    throw std::logic_error("apply_noise: unreachable");
}

} // namespace cascade
