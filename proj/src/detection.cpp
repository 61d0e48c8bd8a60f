#include "fabloop/detection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fabloop {

GrayImage enhance_contrast(const GrayImage& img) {
    const auto [lo_it, hi_it] = std::minmax_element(img.pixels.begin(), img.pixels.end());
    const int lo = *lo_it, hi = *hi_it;
    if (lo == hi) return img;  // degenerate range

    GrayImage out(img.width, img.height);
    // 256-entry LUT; integer arithmetic keeps the exact halves so that
    // round-half-up really sees them (a/b + 1/2 floored == (2a+b)/(2b)).
    const int span = hi - lo;
    std::uint8_t lut[256];
    for (int i = lo; i <= hi; ++i) {
        const int num = (i - lo) * 255;
        lut[i] = static_cast<std::uint8_t>((2 * num + span) / (2 * span));
    }
    for (std::size_t i = 0; i < img.pixels.size(); ++i) out.pixels[i] = lut[img.pixels[i]];
    return out;
}

std::array<std::uint64_t, 256> intensity_histogram(const GrayImage& img) {
    std::array<std::uint64_t, 256> hist{};
    for (const std::uint8_t p : img.pixels) ++hist[p];
    return hist;
}

int otsu_threshold(const std::array<std::uint64_t, 256>& histogram) {
    const std::uint64_t total =
        std::accumulate(histogram.begin(), histogram.end(), std::uint64_t{0});
    if (total == 0) return -1;

    double total_moment = 0.0;
    for (int i = 0; i < 256; ++i) total_moment += static_cast<double>(histogram[i]) * i;

    int best = -1;
    double best_variance = 0.0;
    std::uint64_t count_below = 0;
    double moment_below = 0.0;
    for (int t = 0; t < 256; ++t) {
        count_below += histogram[t];
        moment_below += static_cast<double>(histogram[t]) * t;
        const std::uint64_t count_above = total - count_below;
        if (count_below == 0 || count_above == 0) continue;
        const double mean_below = moment_below / count_below;
        const double mean_above = (total_moment - moment_below) / count_above;
        const double diff = mean_below - mean_above;
        const double variance = diff * diff * count_below * count_above;
        if (variance > best_variance) {  // strict: lowest maximizer wins ties
            best_variance = variance;
            best = t;
        }
    }
    return best_variance > 0.0 ? best : -1;
}

BinaryImage threshold(const GrayImage& img, const DetectConfig& cfg) {
    cfg.validate();
    BinaryImage out(img.width, img.height);
    const int t = otsu_threshold(intensity_histogram(img));
    if (t < 0) return out;  // unimodal: all background
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
        const bool dark_side = img.pixels[i] <= t;
        out.mask[i] = (cfg.polarity == Polarity::DefectsDark ? dark_side : !dark_side) ? 1 : 0;
    }
    return out;
}

namespace {

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

}  // namespace

std::vector<DefectRegion> segment(const BinaryImage& bin, const DetectConfig& cfg) {
    cfg.validate();
    const int w = bin.width, h = bin.height;
    std::vector<int> labels(static_cast<std::size_t>(w) * h, -1);

    // Two-pass labeling: scan with backward neighbors, then resolve
    // equivalences through union-find.
    UnionFind uf(0);
    int next_label = 0;
    const bool eight = cfg.connectivity == Connectivity::Eight;
    for (int v = 0; v < h; ++v) {
        for (int u = 0; u < w; ++u) {
            if (!bin.at(u, v)) continue;
            const std::size_t idx = static_cast<std::size_t>(v) * w + u;
            int found = -1;
            auto consider = [&](int nu, int nv) {
                if (nu < 0 || nu >= w || nv < 0) return;
                const int l = labels[static_cast<std::size_t>(nv) * w + nu];
                if (l < 0) return;
                if (found < 0)
                    found = l;
                else if (found != l)
                    uf.unite(found, l);
            };
            consider(u - 1, v);
            consider(u, v - 1);
            if (eight) {
                consider(u - 1, v - 1);
                consider(u + 1, v - 1);
            }
            if (found < 0) {
                found = next_label++;
                uf.parent.push_back(found);
            }
            labels[idx] = uf.find(found);
        }
    }

    // Accumulate per root, keyed by first-encounter order.
    std::vector<int> order(next_label, -1);
    std::vector<DefectRegion> regions;
    std::vector<double> sum_u, sum_v;
    for (int v = 0; v < h; ++v) {
        for (int u = 0; u < w; ++u) {
            const int l = labels[static_cast<std::size_t>(v) * w + u];
            if (l < 0) continue;
            const int root = uf.find(l);
            int slot = order[root];
            if (slot < 0) {
                slot = static_cast<int>(regions.size());
                order[root] = slot;
                DefectRegion r;
                r.min_u = r.max_u = u;
                r.min_v = r.max_v = v;
                regions.push_back(r);
                sum_u.push_back(0.0);
                sum_v.push_back(0.0);
            }
            DefectRegion& r = regions[slot];
            r.area_px += 1;
            r.min_u = std::min(r.min_u, u);
            r.max_u = std::max(r.max_u, u);
            r.min_v = std::min(r.min_v, v);
            r.max_v = std::max(r.max_v, v);
            sum_u[slot] += u;
            sum_v[slot] += v;
        }
    }

    std::vector<DefectRegion> kept;
    for (std::size_t i = 0; i < regions.size(); ++i) {
        DefectRegion& r = regions[i];
        if (r.area_px < cfg.min_area_px) continue;
        r.centroid_px = Eigen::Vector2d(sum_u[i] / r.area_px, sum_v[i] / r.area_px);
        kept.push_back(r);
    }
    return kept;
}

std::vector<DefectRegion> quantify(std::vector<DefectRegion> regions, const BedMapping& m) {
    for (DefectRegion& r : regions) {
        r.centroid_mm = pixel_to_bed(r.centroid_px, m);
        r.equivalent_diameter_mm =
            2.0 * std::sqrt(static_cast<double>(r.area_px) / M_PI) * m.mm_per_pixel;
    }
    std::stable_sort(regions.begin(), regions.end(),
                     [](const DefectRegion& a, const DefectRegion& b) {
                         if (a.centroid_mm.x() != b.centroid_mm.x())
                             return a.centroid_mm.x() < b.centroid_mm.x();
                         return a.centroid_mm.y() < b.centroid_mm.y();
                     });
    return regions;
}

DetectTrace detect_with_trace(const GrayImage& raw, const Homography& h, const BedMapping& m,
                              const DetectConfig& cfg, int frame_px) {
    cfg.validate();
    m.validate(frame_px);

    GrayImage rectified = rectify(raw, h, frame_px);

    // Crop the ROI (integral origin expected; rounded if not).
    const int ou = static_cast<int>(std::llround(m.roi_origin_px.x()));
    const int ov = static_cast<int>(std::llround(m.roi_origin_px.y()));
    GrayImage roi(m.roi_size_px, m.roi_size_px);
    for (int v = 0; v < m.roi_size_px; ++v)
        for (int u = 0; u < m.roi_size_px; ++u) roi.at(u, v) = rectified.at(ou + u, ov + v);

    GrayImage enhanced = enhance_contrast(roi);
    BinaryImage bin = threshold(enhanced, cfg);
    std::vector<DefectRegion> regions = segment(bin, cfg);

    // Drop border-connected components and translate into the rectified frame.
    const int edge = m.roi_size_px - 1;
    std::vector<DefectRegion> interior;
    for (DefectRegion& r : regions) {
        if (r.min_u == 0 || r.min_v == 0 || r.max_u == edge || r.max_v == edge) continue;
        r.centroid_px += Eigen::Vector2d(ou, ov);
        r.min_u += ou;
        r.max_u += ou;
        r.min_v += ov;
        r.max_v += ov;
        interior.push_back(r);
    }
    return DetectTrace{std::move(rectified), std::move(enhanced), std::move(bin),
                       quantify(std::move(interior), m)};
}

std::vector<DefectRegion> detect(const GrayImage& raw, const Homography& h, const BedMapping& m,
                                 const DetectConfig& cfg, int frame_px) {
    return detect_with_trace(raw, h, m, cfg, frame_px).regions;
}

void burn_overlay(GrayImage& img, const std::vector<DefectRegion>& regions) {
    for (const DefectRegion& r : regions) {
        for (int u = r.min_u; u <= r.max_u; ++u) {
            if (img.in_bounds(u, r.min_v)) img.at(u, r.min_v) = 255;
            if (img.in_bounds(u, r.max_v)) img.at(u, r.max_v) = 255;
        }
        for (int v = r.min_v; v <= r.max_v; ++v) {
            if (img.in_bounds(r.min_u, v)) img.at(r.min_u, v) = 255;
            if (img.in_bounds(r.max_u, v)) img.at(r.max_u, v) = 255;
        }
    }
}

}  // namespace fabloop
