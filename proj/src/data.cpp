#include "dpsinkhorn/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "dpsinkhorn/errors.hpp"

namespace dpsinkhorn {

std::vector<size_t> poisson_sample(size_t M, double q, CounterRng& rng) {
    if (q < 0.0 || q > 1.0) throw ValidationError("poisson_sample: q must be in [0,1]");
    std::vector<size_t> out;
    for (size_t i = 0; i < M; ++i) {
        if (rng.next_unit() < q) out.push_back(i);
    }
    return out;
}

size_t IdxTensor::item_size() const {
    size_t s = 1;
    for (size_t k = 1; k < dims.size(); ++k) s *= dims[k];
    return s;
}

IdxTensor read_idx(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("read_idx: cannot open " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (bytes.size() < 4)
        throw IdxTruncatedError("read_idx: " + path + ": header truncated (expected at least 4 bytes, got " +
                                    std::to_string(bytes.size()) + ")",
                                4, bytes.size());
    if (bytes[0] != 0x00 || bytes[1] != 0x00)
        throw IdxBadMagicError("read_idx: " + path + ": bad magic bytes");
    if (bytes[2] != 0x08)
        throw IdxUnsupportedTypeError("read_idx: " + path + ": unsupported type code 0x" +
                                      [](uint8_t b) { char buf[3]; std::snprintf(buf, 3, "%02X", b); return std::string(buf); }(bytes[2]));
    const size_t ndims = bytes[3];
    const size_t header_bytes = 4 + 4 * ndims;
    if (bytes.size() < header_bytes)
        throw IdxTruncatedError("read_idx: " + path + ": dimension header truncated (expected " +
                                    std::to_string(header_bytes) + " bytes, got " + std::to_string(bytes.size()) + ")",
                                header_bytes, bytes.size());
    IdxTensor t;
    size_t total = 1;
    for (size_t k = 0; k < ndims; ++k) {
        const size_t off = 4 + 4 * k;
        const uint32_t dim = (uint32_t(bytes[off]) << 24) | (uint32_t(bytes[off + 1]) << 16) |
                             (uint32_t(bytes[off + 2]) << 8) | uint32_t(bytes[off + 3]);
        t.dims.push_back(dim);
        total *= dim;
    }
    if (ndims == 0) total = 0;
    const size_t expected = header_bytes + total;
    if (bytes.size() != expected)
        throw IdxTruncatedError("read_idx: " + path + ": payload size mismatch (expected " +
                                    std::to_string(expected) + " bytes, got " + std::to_string(bytes.size()) + ")",
                                expected, bytes.size());
    t.payload.assign(bytes.begin() + header_bytes, bytes.end());
    return t;
}

void write_idx(const std::string& path, const IdxTensor& t) {
    if (t.dims.size() > 255) throw ValidationError("write_idx: too many dimensions");
    size_t total = t.dims.empty() ? 0 : 1;
    for (uint32_t d : t.dims) total *= d;
    if (total != t.payload.size())
        throw ValidationError("write_idx: payload size does not match dims");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("write_idx: cannot open " + path);
    const uint8_t header[4] = {0x00, 0x00, 0x08, static_cast<uint8_t>(t.dims.size())};
    out.write(reinterpret_cast<const char*>(header), 4);
    for (uint32_t d : t.dims) {
        const uint8_t be[4] = {static_cast<uint8_t>(d >> 24), static_cast<uint8_t>(d >> 16),
                               static_cast<uint8_t>(d >> 8), static_cast<uint8_t>(d)};
        out.write(reinterpret_cast<const char*>(be), 4);
    }
    if (!t.payload.empty())
        out.write(reinterpret_cast<const char*>(t.payload.data()), static_cast<std::streamsize>(t.payload.size()));
    if (!out) throw IoError("write_idx: write failed for " + path);
}

double normalize_byte(uint8_t v) { return static_cast<double>(v) / 127.5 - 1.0; }

Matrix normalize(const IdxTensor& t) {
    const size_t count = t.count();
    const size_t d = t.item_size();
    Matrix out(count, d);
    for (size_t i = 0; i < count; ++i)
        for (size_t j = 0; j < d; ++j) out(i, j) = normalize_byte(t.payload[i * d + j]);
    return out;
}

uint8_t denormalize(double v) {
    // Round half down: ceil(y − 0.5), so the midpoint 127.5 (v = 0) lands on
    // 127 and normalize/denormalize round-trips every byte.
    const double y = (v + 1.0) * 127.5;
    double r = std::ceil(y - 0.5);
    if (r < 0.0) r = 0.0;
    if (r > 255.0) r = 255.0;
    return static_cast<uint8_t>(r);
}

Matrix downsample(const Matrix& images, size_t out_side) {
    if (out_side == 0) throw ValidationError("downsample: output side must be positive");
    const size_t d = images.cols();
    const size_t side = static_cast<size_t>(std::lround(std::sqrt(static_cast<double>(d))));
    if (side * side != d)
        throw ValidationError("downsample: rows are not square rasters (d=" + std::to_string(d) + ")");
    if (side == out_side) return images;
    Matrix out(images.rows(), out_side * out_side);
    const double scale = static_cast<double>(side) / static_cast<double>(out_side);
    for (size_t img = 0; img < images.rows(); ++img) {
        const double* src = images.row(img);
        double* dst = out.row(img);
        for (size_t oy = 0; oy < out_side; ++oy) {
            const double sy = (static_cast<double>(oy) + 0.5) * scale - 0.5;
            const double cy = std::clamp(sy, 0.0, static_cast<double>(side - 1));
            const size_t y0 = static_cast<size_t>(cy);
            const size_t y1 = std::min(y0 + 1, side - 1);
            const double wy = cy - static_cast<double>(y0);
            for (size_t ox = 0; ox < out_side; ++ox) {
                const double sx = (static_cast<double>(ox) + 0.5) * scale - 0.5;
                const double cx = std::clamp(sx, 0.0, static_cast<double>(side - 1));
                const size_t x0 = static_cast<size_t>(cx);
                const size_t x1 = std::min(x0 + 1, side - 1);
                const double wx = cx - static_cast<double>(x0);
                const double top = src[y0 * side + x0] * (1.0 - wx) + src[y0 * side + x1] * wx;
                const double bot = src[y1 * side + x0] * (1.0 - wx) + src[y1 * side + x1] * wx;
                dst[oy * out_side + ox] = top * (1.0 - wy) + bot * wy;
            }
        }
    }
    return out;
}

Dataset synth_mixture(const std::vector<MixtureComponent>& components, size_t count, CounterRng& rng) {
    if (components.empty()) throw ValidationError("synth_mixture: empty component list");
    if (count == 0) throw ValidationError("synth_mixture: count must be >= 1");
    double wsum = 0.0;
    size_t L = 0;
    for (const auto& c : components) {
        wsum += c.weight;
        if (c.weight < 0.0) throw ValidationError("synth_mixture: negative component weight");
        // 2×2 positive definiteness: leading minor and determinant.
        const double det = c.cov[0][0] * c.cov[1][1] - c.cov[0][1] * c.cov[1][0];
        if (!(c.cov[0][0] > 0.0) || !(det > 0.0) || c.cov[0][1] != c.cov[1][0])
            throw ValidationError("synth_mixture: covariance is not symmetric positive definite");
        L = std::max(L, static_cast<size_t>(c.class_id) + 1);
    }
    if (std::abs(wsum - 1.0) > 1e-9)
        throw ValidationError("synth_mixture: weights sum to " + std::to_string(wsum) + ", expected 1");

    Dataset ds;
    ds.L = L;
    ds.provenance = "synth_mixture";
    ds.samples = Matrix(count, 2);
    ds.labels.resize(count);

    // Draw raw mixture samples via per-component Cholesky factors.
    for (size_t i = 0; i < count; ++i) {
        const double u = rng.next_unit();
        double acc = 0.0;
        const MixtureComponent* comp = &components.back();
        for (const auto& c : components) {
            acc += c.weight;
            if (u < acc) {
                comp = &c;
                break;
            }
        }
        // Cholesky of [[a,b],[b,c]]: L = [[√a,0],[b/√a, √(c−b²/a)]].
        const double la = std::sqrt(comp->cov[0][0]);
        const double lb = comp->cov[0][1] / la;
        const double lc = std::sqrt(comp->cov[1][1] - lb * lb);
        const double z0 = rng.next_gaussian();
        const double z1 = rng.next_gaussian();
        ds.samples(i, 0) = comp->mean[0] + la * z0;
        ds.samples(i, 1) = comp->mean[1] + lb * z0 + lc * z1;
        ds.labels[i] = comp->class_id;
    }

    // Record and apply the bounding-box squash into [−1,1]².
    ds.transform.scale.assign(2, 1.0);
    ds.transform.offset.assign(2, 0.0);
    for (size_t k = 0; k < 2; ++k) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (size_t i = 0; i < count; ++i) {
            lo = std::min(lo, ds.samples(i, k));
            hi = std::max(hi, ds.samples(i, k));
        }
        const double span = hi - lo;
        if (span > 0.0) {
            ds.transform.scale[k] = 2.0 / span;
            ds.transform.offset[k] = -1.0 - lo * ds.transform.scale[k];
        } else {
            ds.transform.scale[k] = 1.0;
            ds.transform.offset[k] = -lo;  // constant column maps to 0
        }
        for (size_t i = 0; i < count; ++i) {
            double v = ds.samples(i, k) * ds.transform.scale[k] + ds.transform.offset[k];
            ds.samples(i, k) = std::clamp(v, -1.0, 1.0);
        }
    }
    return ds;
}

Dataset subset(const Dataset& ds, const std::vector<size_t>& indices) {
    Dataset out;
    out.L = ds.L;
    out.provenance = ds.provenance;
    out.transform = ds.transform;
    out.samples = Matrix(indices.size(), ds.samples.cols());
    out.labels.resize(indices.size());
    for (size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= ds.samples.rows()) throw ValidationError("subset: index out of range");
        for (size_t j = 0; j < ds.samples.cols(); ++j) out.samples(i, j) = ds.samples(indices[i], j);
        out.labels[i] = ds.labels[indices[i]];
    }
    return out;
}

std::vector<MixtureComponent> default_mixture_spec() {
    // Three well-separated blobs; covariances mildly anisotropic so the
    // generator has structure to learn beyond the means.
    return {
        MixtureComponent{{-1.1, -1.0}, {{0.055, 0.010}, {0.010, 0.040}}, 0, 1.0 / 3.0},
        MixtureComponent{{1.2, -0.9}, {{0.045, -0.008}, {-0.008, 0.055}}, 1, 1.0 / 3.0},
        MixtureComponent{{0.0, 1.25}, {{0.050, 0.000}, {0.000, 0.045}}, 2, 1.0 / 3.0},
    };
}

}  // namespace dpsinkhorn
