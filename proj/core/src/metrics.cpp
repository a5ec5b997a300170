// Copyright (C) 2026 The tsflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "tsflow/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace tsflow {

namespace {

// Uniform [F, C, P] view of a frame stack or single frame plus its [F, 1, P] mask.
struct Layout {
    std::size_t frames, channels, plane;
};

Layout masked_layout(const Tensor& pred, const Tensor& truth, const Tensor& mask, const char* what) {
    if (pred.shape() != truth.shape())
        throw ShapeError(std::string(what) + ": pred " + shape_str(pred.shape()) + " vs truth " +
                         shape_str(truth.shape()));
    const Shape& s = pred.shape();
    Layout l{};
    if (s.size() == 4 && mask.rank() == 4 && mask.dim(0) == s[0] && mask.dim(1) == 1 && mask.dim(2) == s[2] &&
        mask.dim(3) == s[3])
        l = {s[0], s[1], s[2] * s[3]};
    else if (s.size() == 3 && mask.rank() == 3 && mask.dim(0) == 1 && mask.dim(1) == s[1] && mask.dim(2) == s[2])
        l = {1, s[0], s[1] * s[2]};
    else
        throw ShapeError(std::string(what) + ": mask " + shape_str(mask.shape()) + " does not fit " + shape_str(s));
    return l;
}

double quantile_sorted(const std::vector<double>& v, double q) {
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::vector<double> average_ranks(std::span<const double> v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
        i = j + 1;
    }
    return ranks;
}

// Linear interpolation of one pixel/band series sampled at observed days.
double interpolate_series(std::span<const int> days, std::span<const double> values, double day) {
    if (day <= days.front()) return values.front();
    if (day >= days.back()) return values.back();
    const auto it = std::upper_bound(days.begin(), days.end(), day);
    const std::size_t hi = static_cast<std::size_t>(it - days.begin());
    const std::size_t lo = hi - 1;
    const double w = (day - days[lo]) / static_cast<double>(days[hi] - days[lo]);
    return values[lo] + w * (values[hi] - values[lo]);
}

void check_baseline_inputs(const Tensor& x, const Tensor& mask, std::span<const int> dates) {
    if (x.rank() != 4 || mask.rank() != 4 || mask.dim(0) != x.dim(0) || mask.dim(1) != 1 || mask.dim(2) != x.dim(2) ||
        mask.dim(3) != x.dim(3))
        throw ShapeError("linear_baseline: mask " + shape_str(mask.shape()) + " does not fit " + shape_str(x.shape()));
    if (dates.size() != x.dim(0)) throw ShapeError("linear_baseline: date count does not match frame count");
    for (std::size_t i = 1; i < dates.size(); ++i)
        if (dates[i] <= dates[i - 1]) throw std::invalid_argument("linear_baseline: dates must be strictly increasing");
}

// Mean of the observed entries of each band; fallback for never-observed pixels.
std::vector<double> observed_band_means(const Tensor& x, const Tensor& mask) {
    const std::size_t t = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
    std::vector<double> mean(c, 0.0);
    std::vector<std::size_t> n(c, 0);
    for (std::size_t f = 0; f < t; ++f)
        for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t p = 0; p < plane; ++p)
                if (mask.at(f * plane + p) == 0.0) {
                    mean[ch] += x.at((f * c + ch) * plane + p);
                    ++n[ch];
                }
    for (std::size_t ch = 0; ch < c; ++ch) mean[ch] = n[ch] ? mean[ch] / static_cast<double>(n[ch]) : 0.0;
    return mean;
}

// Calls fill(pixel, band, observed days, observed values) for every pixel/band series.
template <typename Fn>
void for_each_series(const Tensor& x, const Tensor& mask, std::span<const int> dates, Fn&& fill) {
    const std::size_t t = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
    std::vector<int> days;
    std::vector<double> values;
    for (std::size_t p = 0; p < plane; ++p) {
        for (std::size_t ch = 0; ch < c; ++ch) {
            days.clear();
            values.clear();
            for (std::size_t f = 0; f < t; ++f)
                if (mask.at(f * plane + p) == 0.0) {
                    days.push_back(dates[f]);
                    values.push_back(x.at((f * c + ch) * plane + p));
                }
            fill(p, ch, std::span<const int>(days), std::span<const double>(values));
        }
    }
}

}  // namespace

ErrorPair mae_rmse_masked(const Tensor& pred, const Tensor& truth, const Tensor& mask) {
    const Layout l = masked_layout(pred, truth, mask, "mae_rmse_masked");
    double abs_sum = 0.0, sq_sum = 0.0;
    std::size_t n = 0;
    for (std::size_t f = 0; f < l.frames; ++f)
        for (std::size_t p = 0; p < l.plane; ++p) {
            if (mask.at(f * l.plane + p) == 0.0) continue;
            for (std::size_t ch = 0; ch < l.channels; ++ch) {
                const std::size_t i = (f * l.channels + ch) * l.plane + p;
                const double e = pred.at(i) - truth.at(i);
                abs_sum += std::abs(e);
                sq_sum += e * e;
                ++n;
            }
        }
    if (n == 0) throw std::invalid_argument("mae_rmse_masked: mask selects no pixels");
    return {abs_sum / static_cast<double>(n), std::sqrt(sq_sum / static_cast<double>(n)), n};
}

SamResult sam(const Tensor& pred, const Tensor& truth, const Tensor& mask) {
    const Layout l = masked_layout(pred, truth, mask, "sam");
    SamResult r;
    double sum = 0.0;
    std::size_t masked = 0;
    for (std::size_t f = 0; f < l.frames; ++f)
        for (std::size_t p = 0; p < l.plane; ++p) {
            if (mask.at(f * l.plane + p) == 0.0) continue;
            ++masked;
            double dot = 0.0, na = 0.0, nb = 0.0;
            for (std::size_t ch = 0; ch < l.channels; ++ch) {
                const std::size_t i = (f * l.channels + ch) * l.plane + p;
                dot += pred.at(i) * truth.at(i);
                na += pred.at(i) * pred.at(i);
                nb += truth.at(i) * truth.at(i);
            }
            if (na == 0.0 || nb == 0.0) {
                ++r.zero_norm;
                continue;
            }
            const double cosv = std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
            sum += std::acos(cosv) * 180.0 / std::numbers::pi;
            ++r.pixels;
        }
    if (masked == 0) throw std::invalid_argument("sam: mask selects no pixels");
    if (r.pixels == 0) throw std::invalid_argument("sam: every masked spectrum has zero norm");
    r.degrees = sum / static_cast<double>(r.pixels);
    return r;
}

double psnr_from_mse(double mse, double peak) {
    if (!(peak > 0.0)) throw std::invalid_argument("psnr: peak must be positive");
    if (mse < 0.0) throw std::invalid_argument("psnr: negative mse");
    if (mse == 0.0) return kPsnrCapDb;
    return std::min(kPsnrCapDb, 10.0 * std::log10(peak * peak / mse));
}

double psnr(const Tensor& pred, const Tensor& truth, const Tensor& mask, double peak) {
    const ErrorPair e = mae_rmse_masked(pred, truth, mask);
    return psnr_from_mse(e.rmse * e.rmse, peak);
}

double ssim(const Tensor& a, const Tensor& b, const SsimConfig& config) {
    if (a.shape() != b.shape() || a.rank() != 3)
        throw ShapeError("ssim: expected two [C, H, W] frames, got " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
    const std::size_t c = a.dim(0), h = a.dim(1), w = a.dim(2), k = config.window;
    if (k == 0 || h < k || w < k)
        throw std::invalid_argument("ssim: frame " + std::to_string(h) + "x" + std::to_string(w) +
                                    " is smaller than the " + std::to_string(k) + "x" + std::to_string(k) + " window");
    const double c1 = std::pow(config.k1 * config.range, 2);
    const double c2 = std::pow(config.k2 * config.range, 2);
    const double n = static_cast<double>(k * k);
    double total = 0.0;
    for (std::size_t ch = 0; ch < c; ++ch) {
        const std::size_t base = ch * h * w;
        double band = 0.0;
        for (std::size_t i = 0; i + k <= h; ++i)
            for (std::size_t j = 0; j + k <= w; ++j) {
                double sa = 0.0, sb = 0.0, saa = 0.0, sbb = 0.0, sab = 0.0;
                for (std::size_t di = 0; di < k; ++di)
                    for (std::size_t dj = 0; dj < k; ++dj) {
                        const std::size_t idx = base + (i + di) * w + (j + dj);
                        const double va = a.at(idx), vb = b.at(idx);
                        sa += va;
                        sb += vb;
                        saa += va * va;
                        sbb += vb * vb;
                        sab += va * vb;
                    }
                const double ma = sa / n, mb = sb / n;
                const double va = std::max(0.0, saa / n - ma * ma);
                const double vb = std::max(0.0, sbb / n - mb * mb);
                const double cov = sab / n - ma * mb;
                band += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            }
        total += band / static_cast<double>((h - k + 1) * (w - k + 1));
    }
    return total / static_cast<double>(c);
}

Tensor ndvi(const Tensor& frame, std::size_t nir_band, std::size_t red_band, NdviCounter* counter) {
    if (frame.rank() != 3) throw ShapeError("ndvi: expected [C, H, W], got " + shape_str(frame.shape()));
    if (nir_band >= frame.dim(0) || red_band >= frame.dim(0))
        throw std::out_of_range("ndvi: band index outside the frame's channels");
    const std::size_t plane = frame.dim(1) * frame.dim(2);
    std::vector<double> out(plane);
    for (std::size_t p = 0; p < plane; ++p) {
        const double nir = frame.at(nir_band * plane + p);
        const double red = frame.at(red_band * plane + p);
        const double s = nir + red;
        if (s == 0.0) {
            out[p] = 0.0;
            if (counter) ++counter->zero_sum;
        } else {
            out[p] = std::clamp((nir - red) / s, -1.0, 1.0);
        }
    }
    return Tensor(Shape{frame.dim(1), frame.dim(2)}, std::move(out));
}

std::vector<TrajectoryPoint> ndvi_trajectory(const std::vector<Tensor>& maps, std::span<const int> dates,
                                             const Tensor& region_mask) {
    if (maps.size() != dates.size()) throw std::invalid_argument("ndvi_trajectory: one map per date required");
    if (maps.size() < 2) throw std::invalid_argument("ndvi_trajectory: at least two dates required");
    std::vector<std::size_t> pixels;
    for (std::size_t p = 0; p < region_mask.numel(); ++p)
        if (region_mask.at(p) != 0.0) pixels.push_back(p);
    if (pixels.empty()) throw std::invalid_argument("ndvi_trajectory: empty region");
    std::vector<TrajectoryPoint> out;
    for (std::size_t i = 0; i < maps.size(); ++i) {
        if (maps[i].shape() != region_mask.shape())
            throw ShapeError("ndvi_trajectory: map " + shape_str(maps[i].shape()) + " vs region " +
                             shape_str(region_mask.shape()));
        std::vector<double> v;
        v.reserve(pixels.size());
        for (std::size_t p : pixels) v.push_back(maps[i].at(p));
        std::sort(v.begin(), v.end());
        TrajectoryPoint tp;
        tp.date = dates[i];
        tp.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        tp.median = quantile_sorted(v, 0.5);
        tp.q25 = quantile_sorted(v, 0.25);
        tp.q75 = quantile_sorted(v, 0.75);
        out.push_back(tp);
    }
    return out;
}

std::string RankCorrelation::str() const { return flat ? "flat" : std::to_string(value); }

RankCorrelation spearman(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("spearman: length mismatch");
    if (a.size() < 2) throw std::invalid_argument("spearman: at least two points required");
    const auto ra = average_ranks(a);
    const auto rb = average_ranks(b);
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
    const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma) * (ra[i] - ma);
        sbb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) return {0.0, true};
    return {sab / std::sqrt(saa * sbb), false};
}

RankCorrelation trend_agreement(const std::vector<TrajectoryPoint>& generated,
                                const std::vector<TrajectoryPoint>& reference) {
    if (generated.size() != reference.size()) throw std::invalid_argument("trend_agreement: length mismatch");
    std::vector<double> g, r;
    for (std::size_t i = 0; i < generated.size(); ++i) {
        if (generated[i].date != reference[i].date) throw std::invalid_argument("trend_agreement: dates differ");
        g.push_back(generated[i].mean);
        r.push_back(reference[i].mean);
    }
    return spearman(g, r);
}

Tensor linear_baseline(const Tensor& x, const Tensor& mask, std::span<const int> dates, BaselineCounter* counter) {
    check_baseline_inputs(x, mask, dates);
    const std::size_t t = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
    const std::vector<double> band_mean = observed_band_means(x, mask);
    std::vector<double> out(x.values().begin(), x.values().end());
    for_each_series(x, mask, dates, [&](std::size_t p, std::size_t ch, std::span<const int> days,
                                        std::span<const double> values) {
        if (days.size() == t) return;
        if (days.empty() && counter) ++counter->unobserved_pixels;
        for (std::size_t f = 0; f < t; ++f) {
            if (mask.at(f * plane + p) == 0.0) continue;
            out[(f * c + ch) * plane + p] =
                days.empty() ? band_mean[ch] : interpolate_series(days, values, static_cast<double>(dates[f]));
        }
    });
    return Tensor(x.shape(), std::move(out));
}

Tensor linear_baseline_at(const Tensor& x, const Tensor& mask, std::span<const int> dates, int day,
                          BaselineCounter* counter) {
    check_baseline_inputs(x, mask, dates);
    const std::size_t c = x.dim(1), plane = x.dim(2) * x.dim(3);
    const std::vector<double> band_mean = observed_band_means(x, mask);
    std::vector<double> out(c * plane);
    for_each_series(x, mask, dates, [&](std::size_t p, std::size_t ch, std::span<const int> days,
                                        std::span<const double> values) {
        if (days.empty()) {
            if (counter) ++counter->unobserved_pixels;
            out[ch * plane + p] = band_mean[ch];
        } else {
            out[ch * plane + p] = interpolate_series(days, values, static_cast<double>(day));
        }
    });
    return Tensor(Shape{c, x.dim(2), x.dim(3)}, std::move(out));
}

MetricValues evaluate_masked(const Tensor& pred, const Tensor& truth, const Tensor& mask) {
    const ErrorPair e = mae_rmse_masked(pred, truth, mask);
    MetricValues v;
    v.mae = e.mae;
    v.rmse = e.rmse;
    v.masked_pixels = e.entries / pred.dim(pred.rank() == 4 ? 1 : 0);
    v.psnr_db = psnr_from_mse(e.rmse * e.rmse);
    v.sam_degrees = sam(pred, truth, mask).degrees;
    if (pred.rank() == 3) {
        v.ssim = ssim(pred, truth);
        v.ssim_frames = 1;
        return v;
    }
    const std::size_t plane = pred.dim(2) * pred.dim(3);
    double total = 0.0;
    for (std::size_t f = 0; f < pred.dim(0); ++f) {
        bool any = false;
        for (std::size_t p = 0; p < plane && !any; ++p) any = mask.at(f * plane + p) != 0.0;
        if (!any) continue;
        const std::size_t fsz = pred.dim(1) * plane;
        Tensor a(Shape{pred.dim(1), pred.dim(2), pred.dim(3)},
                 std::vector<double>(pred.values().begin() + static_cast<std::ptrdiff_t>(f * fsz),
                                     pred.values().begin() + static_cast<std::ptrdiff_t>((f + 1) * fsz)));
        Tensor b(Shape{pred.dim(1), pred.dim(2), pred.dim(3)},
                 std::vector<double>(truth.values().begin() + static_cast<std::ptrdiff_t>(f * fsz),
                                     truth.values().begin() + static_cast<std::ptrdiff_t>((f + 1) * fsz)));
        total += ssim(a, b);
        ++v.ssim_frames;
    }
    v.ssim = total / static_cast<double>(v.ssim_frames);
    return v;
}

void MetricReport::add(std::string id, const MetricValues& values) { rows.push_back({std::move(id), values}); }

void MetricReport::finalize() {
    aggregate = MetricValues{};
    if (rows.empty()) return;
    for (const auto& r : rows) {
        aggregate.mae += r.values.mae;
        aggregate.rmse += r.values.rmse;
        aggregate.sam_degrees += r.values.sam_degrees;
        aggregate.psnr_db += r.values.psnr_db;
        aggregate.ssim += r.values.ssim;
        aggregate.masked_pixels += r.values.masked_pixels;
        aggregate.ssim_frames += r.values.ssim_frames;
    }
    const double n = static_cast<double>(rows.size());
    aggregate.mae /= n;
    aggregate.rmse /= n;
    aggregate.sam_degrees /= n;
    aggregate.psnr_db /= n;
    aggregate.ssim /= n;
}

}  // namespace tsflow
