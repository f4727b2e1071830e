#include "fame/region.hpp"

#include <algorithm>
#include <cmath>

#include "fame/error.hpp"

namespace fame {

int RegionMap::label_count() const {
    int mx = -1;
    for (int l : labels) mx = std::max(mx, l);
    return mx + 1;
}

void RegionMap::validate() const {
    if (height == 0 || width == 0 || labels.size() != cells()) {
        throw Error(ErrorKind::shape, "region map: bad dimensions");
    }
    const int k = label_count();
    if (k <= 0) throw Error(ErrorKind::config, "region map: no labels");
    std::vector<bool> seen(static_cast<std::size_t>(k), false);
    for (int l : labels) {
        if (l < 0) throw Error(ErrorKind::config, "region map: negative label");
        seen[static_cast<std::size_t>(l)] = true;
    }
    for (bool s : seen) {
        if (!s) throw Error(ErrorKind::config, "region map: label set not contiguous");
    }
}

Tensor build_region_indicator(const RegionMap& rm) {
    rm.validate();
    const std::size_t n = rm.cells();
    Tensor r({n, n});
    for (std::size_t x = 0; x < n; ++x) {
        for (std::size_t y = 0; y < n; ++y) {
            r.at(x, y) = rm.labels[x] == rm.labels[y] ? 1.0 : 0.0;
        }
    }
    return r;
}

Tensor temporal_mean_features(const Tensor& latent_video) {
    if (latent_video.rank() != 4) {
        throw Error(ErrorKind::shape, "temporal_mean_features: rank-4 latent required");
    }
    const std::size_t h = latent_video.dim(0), w = latent_video.dim(1);
    const std::size_t l = latent_video.dim(2), c = latent_video.dim(3);
    Tensor f({h * w, c});
    for (std::size_t q = 0; q < h * w; ++q) {
        for (std::size_t t = 0; t < l; ++t) {
            for (std::size_t ch = 0; ch < c; ++ch) {
                f.at(q, ch) += latent_video[(q * l + t) * c + ch];
            }
        }
        for (std::size_t ch = 0; ch < c; ++ch) f.at(q, ch) /= static_cast<double>(l);
    }
    return f;
}

Tensor standardize_channels(const Tensor& features) {
    if (features.rank() != 2) {
        throw Error(ErrorKind::shape, "standardize_channels: rank-2 input required");
    }
    const std::size_t n = features.rows(), c = features.cols();
    Tensor out = features;
    for (std::size_t ch = 0; ch < c; ++ch) {
        double mean = 0.0;
        for (std::size_t q = 0; q < n; ++q) mean += features.at(q, ch);
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t q = 0; q < n; ++q) {
            const double d = features.at(q, ch) - mean;
            var += d * d;
        }
        const double sd = std::sqrt(var / static_cast<double>(n));
        for (std::size_t q = 0; q < n; ++q) {
            out.at(q, ch) = sd < 1e-12 ? 0.0 : (features.at(q, ch) - mean) / sd;
        }
    }
    return out;
}

Tensor build_similarity_mask(const Tensor& features, double tau) {
    if (tau <= 0.0) throw Error(ErrorKind::config, "build_similarity_mask: tau must be > 0");
    if (features.rank() != 2) {
        throw Error(ErrorKind::shape, "build_similarity_mask: rank-2 features required");
    }
    const std::size_t n = features.rows(), c = features.cols();
    Tensor s({n, n});
    for (std::size_t q1 = 0; q1 < n; ++q1) {
        s.at(q1, q1) = 1.0;
        for (std::size_t q2 = q1 + 1; q2 < n; ++q2) {
            double d2 = 0.0;
            for (std::size_t ch = 0; ch < c; ++ch) {
                const double d = features.at(q1, ch) - features.at(q2, ch);
                d2 += d * d;
            }
            const double v = std::exp(-d2 / (tau * tau));
            s.at(q1, q2) = v;
            s.at(q2, q1) = v;
        }
    }
    return s;
}

Tensor export_region_attention(const Tensor& attn, const RegionMap& rm) {
    rm.validate();
    const std::size_t n = rm.cells();
    if (attn.rank() != 2 || attn.rows() != n || attn.cols() != n) {
        throw Error(ErrorKind::shape, "export_region_attention: attention shape mismatch");
    }
    for (std::size_t x = 0; x < n; ++x) {
        double sum = 0.0;
        for (std::size_t y = 0; y < n; ++y) sum += attn.at(x, y);
        if (std::abs(sum - 1.0) > 1e-9) {
            throw Error(ErrorKind::numeric, "export_region_attention: rows must sum to 1");
        }
    }
    const std::size_t k = static_cast<std::size_t>(rm.label_count());
    Tensor a({n, k});
    for (std::size_t x = 0; x < n; ++x) {
        for (std::size_t y = 0; y < n; ++y) {
            a.at(x, static_cast<std::size_t>(rm.labels[y])) += attn.at(x, y);
        }
    }
    return a;
}

RegionMap synth_region_map(std::size_t h, std::size_t w, RegionLayout layout,
                           std::uint64_t seed) {
    if (h < 2 || w < 2) throw Error(ErrorKind::config, "synth_region_map: dims must be >= 2");
    RegionMap rm{h, w, std::vector<int>(h * w, 0)};
    switch (layout) {
        case RegionLayout::halves:
            for (std::size_t x = 0; x < h; ++x)
                for (std::size_t y = 0; y < w; ++y)
                    rm.labels[x * w + y] = y < w / 2 ? 0 : 1;
            break;
        case RegionLayout::disk: {
            const double cx = (static_cast<double>(h) - 1.0) / 2.0;
            const double cy = (static_cast<double>(w) - 1.0) / 2.0;
            const double r = static_cast<double>(std::min(h, w)) / 4.0;
            for (std::size_t x = 0; x < h; ++x) {
                for (std::size_t y = 0; y < w; ++y) {
                    const double dx = static_cast<double>(x) - cx;
                    const double dy = static_cast<double>(y) - cy;
                    rm.labels[x * w + y] = dx * dx + dy * dy <= r * r ? 1 : 0;
                }
            }
            // Degenerate tiny maps may leave the disk empty; keep labels contiguous.
            if (std::count(rm.labels.begin(), rm.labels.end(), 1) == 0) {
                std::fill(rm.labels.begin(), rm.labels.end(), 0);
            }
            break;
        }
        case RegionLayout::stripes: {
            const std::size_t stripes = std::min(w, 2 + static_cast<std::size_t>(seed % 3));
            for (std::size_t x = 0; x < h; ++x)
                for (std::size_t y = 0; y < w; ++y)
                    rm.labels[x * w + y] = static_cast<int>((y * stripes) / w);
            break;
        }
    }
    rm.validate();
    return rm;
}

Tensor region_map_to_tensor(const RegionMap& rm) {
    rm.validate();
    Tensor t({rm.height, rm.width});
    for (std::size_t i = 0; i < rm.cells(); ++i) t[i] = static_cast<double>(rm.labels[i]);
    return t;
}

RegionMap region_map_from_tensor(const Tensor& t) {
    if (t.rank() != 2) throw Error(ErrorKind::shape, "region map: rank-2 tensor required");
    RegionMap rm{t.dim(0), t.dim(1), std::vector<int>(t.size())};
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double v = t[i];
        if (v < 0.0 || v != std::floor(v)) {
            throw Error(ErrorKind::config, "region map: labels must be non-negative integers");
        }
        rm.labels[i] = static_cast<int>(v);
    }
    rm.validate();
    return rm;
}

}  // namespace fame
