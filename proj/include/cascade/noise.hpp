#pragma once

#include <string>
#include <vector>

#include "cascade/data.hpp"
#include "cascade/rng.hpp"

namespace cascade {

enum class NoiseKind { Focus, Perlin, Occlusion, Resolution, Translation, Rotation };

NoiseKind noise_kind_from_name(const std::string& name);
const char* noise_kind_name(NoiseKind k);

// One corruption applied to an un-normalized ([0,1]) image. Output shape
// always equals input shape and values stay in range.
struct NoiseSpec {
    NoiseKind kind = NoiseKind::Occlusion;
    std::size_t patch = 8;        // focus / occlusion patch side (half the image at desk scale)
    double blur_sigma = 1.0;      // focus: blur outside the patch
    double coverage = 0.4;        // perlin: fraction of pixels perturbed
    double perlin_cell = 4.0;     // perlin lattice cell size in pixels
    std::size_t down_factor = 2;  // resolution: pooling factor
    int shift = 4;                // translation: +-shift pixels
    double angle_deg = 60.0;      // rotation: +-angle
    float occlusion_value = 0.f;
};

Image apply_noise(const Image& img, const NoiseSpec& spec, Rng& rng);

// Classic 2D lattice-gradient noise with smoothstep interpolation, exposed so
// tests can compare against an independently written oracle on a shared rng.
// Gradients are unit vectors drawn in raster order over the (ny+1)x(nx+1)
// lattice; the field is roughly in [-1,1].
std::vector<float> perlin_field(std::size_t height, std::size_t width, double cell, Rng& rng);

Image gaussian_blur(const Image& img, double sigma);

} // namespace cascade
